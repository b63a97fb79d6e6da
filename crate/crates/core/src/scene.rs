//! Ground-truth tabletop world: catalog, scene sampling, the environment
//! dictionary shown to the language model, and scene mutation events.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{footprint, Extents, Frame, GeometryError, Pose, Rect2};

pub const DEFAULT_CLEARANCE: f64 = 0.01;
pub const DEFAULT_MAX_RETRIES: usize = 1000;
/// Maximum tilt of an upright object, in degrees.
pub const UPRIGHT_TOLERANCE_DEG: f64 = 2.0;

const BUNDLED_CATALOG: &str = include_str!("../data/catalog.json");

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("catalog parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid catalog entry {index}: {reason}")]
    InvalidEntry { index: usize, reason: String },
    #[error("duplicate catalog name {0:?}")]
    DuplicateName(String),
    #[error("requested {requested} objects but catalog has {available}")]
    TooManyObjects { requested: usize, available: usize },
    #[error("could not place {name:?} after {retries} attempts")]
    PlacementFailed { name: String, retries: usize },
    #[error("unknown object id {0}")]
    UnknownObject(ObjectId),
    #[error("no saved pre-event record for {0}")]
    NoSavedRecord(ObjectId),
    #[error("event {event} not applicable to {id} in state {state}")]
    IllegalEvent {
        event: &'static str,
        id: ObjectId,
        state: ObjectState,
    },
    #[error("scene invariant violated: {0}")]
    Invariant(String),
}

macro_rules! token_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(&self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = ();

            /// Case-insensitive.
            fn from_str(s: &str) -> Result<Self, ()> {
                let lower = s.trim().to_ascii_lowercase();
                match lower.as_str() {
                    $($text => Ok($name::$variant),)+
                    _ => Err(()),
                }
            }
        }
    };
}

token_enum!(
    /// Object categories handled by the grasp planner.
    Category {
        Bottle => "bottle",
        Bowl => "bowl",
        Mug => "mug",
    }
);

token_enum!(
    /// Closed color vocabulary shared by the catalog, parser and grounding.
    Color {
        White => "white",
        Black => "black",
        Red => "red",
        Green => "green",
        Blue => "blue",
        Yellow => "yellow",
        Purple => "purple",
        Orange => "orange",
        Pink => "pink",
        Brown => "brown",
        Gray => "gray",
        Transparent => "transparent",
    }
);

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub String);

impl ObjectId {
    pub fn new(s: impl Into<String>) -> Self {
        Self(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectState {
    OnTable,
    Grasped,
    Delivered,
    Toppled,
}

impl fmt::Display for ObjectState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ObjectState::OnTable => "on_table",
            ObjectState::Grasped => "grasped",
            ObjectState::Delivered => "delivered",
            ObjectState::Toppled => "toppled",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub name: String,
    pub category: Category,
    pub color: Color,
    pub extents: Extents,
    /// Graspable body caliber in meters.
    pub body_diameter: f64,
    pub semantic: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Catalog {
    pub entries: Vec<CatalogEntry>,
}

#[derive(Deserialize)]
struct RawCatalog {
    entries: Vec<RawEntry>,
}

#[derive(Deserialize)]
struct RawExtents {
    w: f64,
    d: f64,
    h: f64,
}

#[derive(Deserialize)]
struct RawEntry {
    name: String,
    category: String,
    color: String,
    extents: RawExtents,
    body_diameter: f64,
    semantic: String,
}

impl Catalog {
    /// The 41-object catalog shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED_CATALOG).expect("bundled catalog is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let raw: RawCatalog = serde_json::from_str(text)?;
        let mut seen = HashSet::new();
        let mut entries = Vec::with_capacity(raw.entries.len());
        for (index, e) in raw.entries.into_iter().enumerate() {
            let invalid = |reason: String| SceneError::InvalidEntry { index, reason };
            let name = normalize_name(&e.name);
            if name.is_empty() {
                return Err(invalid("empty name".into()));
            }
            let category = e
                .category
                .parse::<Category>()
                .map_err(|_| invalid(format!("unknown category {:?}", e.category)))?;
            let color = e
                .color
                .parse::<Color>()
                .map_err(|_| invalid(format!("unknown color {:?}", e.color)))?;
            let extents = Extents::new(e.extents.w, e.extents.d, e.extents.h)
                .map_err(|err: GeometryError| invalid(err.to_string()))?;
            if !(e.body_diameter.is_finite() && e.body_diameter > 0.0) {
                return Err(invalid(format!("body_diameter {} must be positive", e.body_diameter)));
            }
            if !seen.insert(name.clone()) {
                return Err(SceneError::DuplicateName(name));
            }
            entries.push(CatalogEntry {
                name,
                category,
                color,
                extents,
                body_diameter: e.body_diameter,
                semantic: e.semantic.trim().to_string(),
            });
        }
        Ok(Self { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&CatalogEntry> {
        let name = normalize_name(name);
        self.entries.iter().find(|e| e.name == name)
    }
}

pub fn load_catalog(path: impl AsRef<Path>) -> Result<Catalog, SceneError> {
    let text = std::fs::read_to_string(path)?;
    Catalog::from_json(&text)
}

/// Lowercases and collapses internal whitespace.
pub fn normalize_name(name: &str) -> String {
    name.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub id: ObjectId,
    pub name: String,
    pub category: Category,
    pub color: Color,
    /// Robot-base pose of the box center.
    pub pose: Pose,
    pub extents: Extents,
    pub body_diameter: f64,
    pub semantic: String,
    pub state: ObjectState,
}

impl ObjectInstance {
    pub fn footprint(&self) -> Rect2 {
        footprint(&self.pose, &self.extents)
    }

    pub fn top_z(&self) -> f64 {
        self.pose.translation.z + self.extents.height() * 0.5
    }

    pub fn base_z(&self) -> f64 {
        self.pose.translation.z - self.extents.height() * 0.5
    }

    pub fn is_on_table(&self) -> bool {
        self.state == ObjectState::OnTable
    }

    /// Present on the table surface, upright or not.
    pub fn is_physical(&self) -> bool {
        matches!(self.state, ObjectState::OnTable | ObjectState::Toppled)
    }
}

/// Axis-aligned table rectangle in the robot-base frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    /// Surface height in meters.
    pub height: f64,
}

impl Default for Table {
    fn default() -> Self {
        // 0.8 m x 0.6 m in front of the robot.
        Self {
            x_min: 0.2,
            x_max: 1.0,
            y_min: -0.3,
            y_max: 0.3,
            height: 0.0,
        }
    }
}

impl Table {
    pub fn contains(&self, p: &Vector2<f64>) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn contains_rect(&self, r: &Rect2) -> bool {
        r.corners().iter().all(|c| self.contains(c))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneParams {
    pub table: Table,
    pub clearance: f64,
    pub max_retries: usize,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            table: Table::default(),
            clearance: DEFAULT_CLEARANCE,
            max_retries: DEFAULT_MAX_RETRIES,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub table: Table,
    pub objects: Vec<ObjectInstance>,
    pub rng_seed: u64,
    /// Pre-event records kept for `restored`.
    #[serde(skip)]
    saved: BTreeMap<ObjectId, ObjectInstance>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", content = "id", rename_all = "snake_case")]
pub enum SceneEvent {
    Delivered(ObjectId),
    Restored(ObjectId),
    Toppled(ObjectId),
}

impl Scene {
    pub fn new(table: Table, objects: Vec<ObjectInstance>, rng_seed: u64) -> Self {
        Self {
            table,
            objects,
            rng_seed,
            saved: BTreeMap::new(),
        }
    }

    pub fn object(&self, id: &ObjectId) -> Option<&ObjectInstance> {
        self.objects.iter().find(|o| &o.id == id)
    }

    pub fn on_table(&self) -> impl Iterator<Item = &ObjectInstance> {
        self.objects.iter().filter(|o| o.is_on_table())
    }

    pub fn has_saved_record(&self, id: &ObjectId) -> bool {
        self.saved.contains_key(id)
    }

    /// Returns the successor snapshot; `self` is left untouched.
    pub fn apply_event(&self, event: &SceneEvent) -> Result<Scene, SceneError> {
        let mut next = self.clone();
        match event {
            SceneEvent::Delivered(id) => {
                let obj = next.object_mut(id)?;
                match obj.state {
                    ObjectState::OnTable | ObjectState::Grasped => {
                        let record = obj.clone();
                        obj.state = ObjectState::Delivered;
                        if record.state == ObjectState::OnTable {
                            next.saved.insert(id.clone(), record);
                        }
                    }
                    state => {
                        return Err(SceneError::IllegalEvent {
                            event: "delivered",
                            id: id.clone(),
                            state,
                        })
                    }
                }
            }
            SceneEvent::Toppled(id) => {
                let obj = next.object_mut(id)?;
                match obj.state {
                    ObjectState::OnTable | ObjectState::Grasped => {
                        let record = obj.clone();
                        obj.state = ObjectState::Toppled;
                        if record.state == ObjectState::OnTable {
                            next.saved.insert(id.clone(), record);
                        }
                    }
                    state => {
                        return Err(SceneError::IllegalEvent {
                            event: "toppled",
                            id: id.clone(),
                            state,
                        })
                    }
                }
            }
            SceneEvent::Restored(id) => {
                next.object_mut(id)?;
                let record = next
                    .saved
                    .remove(id)
                    .ok_or_else(|| SceneError::NoSavedRecord(id.clone()))?;
                *next.object_mut(id)? = record;
            }
        }
        Ok(next)
    }

    fn object_mut(&mut self, id: &ObjectId) -> Result<&mut ObjectInstance, SceneError> {
        self.objects
            .iter_mut()
            .find(|o| &o.id == id)
            .ok_or_else(|| SceneError::UnknownObject(id.clone()))
    }

    /// Checks id uniqueness, upright posture, table containment and clearance.
    pub fn validate(&self, clearance: f64) -> Result<(), SceneError> {
        let mut ids = HashSet::new();
        for o in &self.objects {
            if !ids.insert(&o.id) {
                return Err(SceneError::Invariant(format!("duplicate id {}", o.id)));
            }
        }
        let on_table: Vec<_> = self.on_table().collect();
        for o in &on_table {
            if o.pose.tilt().to_degrees() > UPRIGHT_TOLERANCE_DEG {
                return Err(SceneError::Invariant(format!("{} is not upright", o.id)));
            }
            if !self.table.contains_rect(&o.footprint()) {
                return Err(SceneError::Invariant(format!("{} leaves the table", o.id)));
            }
        }
        for (i, a) in on_table.iter().enumerate() {
            for b in &on_table[i + 1..] {
                if !footprints_clear(a, b, clearance) {
                    return Err(SceneError::Invariant(format!(
                        "{} and {} closer than {clearance} m",
                        a.id, b.id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// True iff the table-plane footprints of `a` and `b` intersect.
pub fn footprint_overlap(a: &ObjectInstance, b: &ObjectInstance) -> bool {
    a.footprint().intersects(&b.footprint())
}

/// True iff the footprints keep at least `clearance` between them.
pub fn footprints_clear(a: &ObjectInstance, b: &ObjectInstance, clearance: f64) -> bool {
    let half = clearance * 0.5;
    !a.footprint().inflated(half).intersects(&b.footprint().inflated(half))
}

pub fn sample_scene(catalog: &Catalog, n: usize, seed: u64) -> Result<Scene, SceneError> {
    sample_scene_with(catalog, n, seed, &SceneParams::default())
}

/// Draws `n` distinct catalog templates and places them upright without overlap.
pub fn sample_scene_with(
    catalog: &Catalog,
    n: usize,
    seed: u64,
    params: &SceneParams,
) -> Result<Scene, SceneError> {
    if n > catalog.len() {
        return Err(SceneError::TooManyObjects {
            requested: n,
            available: catalog.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = rand::seq::index::sample(&mut rng, catalog.len(), n);
    let templates: Vec<&CatalogEntry> = picks.iter().map(|i| &catalog.entries[i]).collect();
    place_with_rng(&templates, seed, params, &mut rng)
}

/// Places the given templates, in order, at random non-overlapping positions.
pub fn place_templates(
    templates: &[&CatalogEntry],
    seed: u64,
    params: &SceneParams,
) -> Result<Scene, SceneError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    place_with_rng(templates, seed, params, &mut rng)
}

fn place_with_rng(
    templates: &[&CatalogEntry],
    seed: u64,
    params: &SceneParams,
    rng: &mut ChaCha8Rng,
) -> Result<Scene, SceneError> {
    let table = params.table;
    let mut objects: Vec<ObjectInstance> = Vec::with_capacity(templates.len());
    for (k, t) in templates.iter().enumerate() {
        let mut placed = None;
        for _ in 0..params.max_retries {
            let x = rng.random_range(table.x_min..=table.x_max);
            let y = rng.random_range(table.y_min..=table.y_max);
            let yaw = rng.random_range(0.0..std::f64::consts::TAU);
            let z = table.height + t.extents.height() * 0.5;
            let candidate = ObjectInstance {
                id: ObjectId(format!("obj-{k:02}")),
                name: t.name.clone(),
                category: t.category,
                color: t.color,
                pose: Pose::upright(yaw, Vector3::new(x, y, z), Frame::RobotBase),
                extents: t.extents,
                body_diameter: t.body_diameter,
                semantic: t.semantic.clone(),
                state: ObjectState::OnTable,
            };
            if table.contains_rect(&candidate.footprint())
                && objects
                    .iter()
                    .all(|o| footprints_clear(o, &candidate, params.clearance))
            {
                placed = Some(candidate);
                break;
            }
        }
        match placed {
            Some(o) => objects.push(o),
            None => {
                return Err(SceneError::PlacementFailed {
                    name: t.name.clone(),
                    retries: params.max_retries,
                })
            }
        }
    }
    Ok(Scene::new(table, objects, seed))
}

/// Fixed asset list of the work cell.
pub const ASSETS: [&str; 3] = ["parallel_gripper", "robot_arm", "table"];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvObject {
    pub category: Category,
    pub color: Color,
    pub name: String,
    pub semantic: String,
}

/// What the language model is allowed to see of a scene. Field order is
/// alphabetical so the JSON text has sorted keys.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvironmentDict {
    pub assets: Vec<String>,
    pub objects: Vec<EnvObject>,
}

impl EnvironmentDict {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("environment dict serializes")
    }

    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

pub fn to_environment_dict(scene: &Scene) -> EnvironmentDict {
    EnvironmentDict {
        assets: ASSETS.iter().map(|s| s.to_string()).collect(),
        objects: scene
            .on_table()
            .map(|o| EnvObject {
                category: o.category,
                color: o.color,
                name: o.name.clone(),
                semantic: o.semantic.clone(),
            })
            .collect(),
    }
}
