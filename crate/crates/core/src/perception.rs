//! Simulated 9D grounding: pick the commanded object (with a configurable
//! confusion model), then report its 6-DoF pose and 3D size in the camera
//! frame with noise, and map estimates into the robot base frame.

use nalgebra::{Isometry3, Matrix3, Point3, Rotation3, Translation3, UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Extents, Frame, GeometryError, Pose};
use crate::llm::TargetCommand;
use crate::scene::{Category, ObjectId, ObjectInstance, Scene};

/// Smallest extent an estimate may shrink to, in meters.
const MIN_ESTIMATED_EXTENT: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GroundingError {
    #[error("no object on the table")]
    EmptyScene,
    #[error("no object matches {color} {category}")]
    NoMatch { color: String, category: String },
    #[error("object {0} is not on the table")]
    NotOnTable(ObjectId),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("{0} must lie in [0, 1]")]
    Probability(&'static str),
    #[error("{0} must be finite and non-negative")]
    Sigma(&'static str),
}

/// Rigid transform taking camera coordinates to robot-base coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ExtrinsicsRepr", into = "ExtrinsicsRepr")]
pub struct CameraExtrinsics {
    base_from_camera: Isometry3<f64>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
struct ExtrinsicsRepr {
    quaternion: [f64; 4],
    translation: [f64; 3],
}

impl TryFrom<ExtrinsicsRepr> for CameraExtrinsics {
    type Error = GeometryError;
    fn try_from(r: ExtrinsicsRepr) -> Result<Self, Self::Error> {
        let pose = Pose::from_xyzw(r.quaternion, r.translation, Frame::RobotBase)?;
        Self::from_isometry(pose.isometry())
    }
}

impl From<CameraExtrinsics> for ExtrinsicsRepr {
    fn from(x: CameraExtrinsics) -> Self {
        let q = x.base_from_camera.rotation.quaternion();
        let t = x.base_from_camera.translation.vector;
        ExtrinsicsRepr {
            quaternion: [q.i, q.j, q.k, q.w],
            translation: [t.x, t.y, t.z],
        }
    }
}

impl Default for CameraExtrinsics {
    /// Torso-mounted camera looking down at the table center.
    fn default() -> Self {
        let eye = Point3::new(0.15, 0.0, 0.75);
        let target = Point3::new(0.6, 0.0, 0.0);
        let rotation = UnitQuaternion::face_towards(&(target - eye), &Vector3::z());
        Self {
            base_from_camera: Isometry3::from_parts(Translation3::from(eye.coords), rotation),
        }
    }
}

impl CameraExtrinsics {
    pub fn identity() -> Self {
        Self {
            base_from_camera: Isometry3::identity(),
        }
    }

    pub fn from_isometry(base_from_camera: Isometry3<f64>) -> Result<Self, GeometryError> {
        let det = base_from_camera.rotation.to_rotation_matrix().matrix().determinant();
        if (det - 1.0).abs() > 1e-9 {
            return Err(GeometryError::ImproperRotation(det));
        }
        Ok(Self { base_from_camera })
    }

    /// Rejects reflections and non-orthonormal matrices.
    pub fn from_matrix(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        let det = rotation.determinant();
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).norm();
        if (det - 1.0).abs() > 1e-9 || ortho > 1e-9 {
            return Err(GeometryError::ImproperRotation(det));
        }
        let rot = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(rotation));
        Ok(Self {
            base_from_camera: Isometry3::from_parts(Translation3::from(translation), rot),
        })
    }

    pub fn base_from_camera(&self) -> &Isometry3<f64> {
        &self.base_from_camera
    }

    pub fn camera_from_base(&self) -> Isometry3<f64> {
        self.base_from_camera.inverse()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundingResult {
    pub selected_id: ObjectId,
    pub label: Category,
    /// Table-plane polygon standing in for the segmentation mask.
    pub footprint: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseEstimate {
    /// Identity of the object that was measured; for scoring only.
    pub target_id: ObjectId,
    pub pose: Pose,
    pub extents: Extents,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    pub p_wrong_grounding: f64,
    /// Per-axis translation noise, meters.
    pub sigma_t: f64,
    /// Rotation noise angle, degrees.
    pub sigma_rot: f64,
    pub sigma_size_rel: f64,
    pub p_missing_depth: f64,
    /// Upward shift of the base-frame center under missing depth, meters.
    pub depth_lift: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            p_wrong_grounding: 0.0,
            sigma_t: 0.0,
            sigma_rot: 0.0,
            sigma_size_rel: 0.0,
            p_missing_depth: 0.0,
            depth_lift: 0.03,
            seed: 0,
        }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<(), NoiseError> {
        for (name, p) in [
            ("p_wrong_grounding", self.p_wrong_grounding),
            ("p_missing_depth", self.p_missing_depth),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(NoiseError::Probability(name));
            }
        }
        for (name, s) in [
            ("sigma_t", self.sigma_t),
            ("sigma_rot", self.sigma_rot),
            ("sigma_size_rel", self.sigma_size_rel),
            ("depth_lift", self.depth_lift),
        ] {
            if !(s.is_finite() && s >= 0.0) {
                return Err(NoiseError::Sigma(name));
            }
        }
        Ok(())
    }
}

fn footprint_polygon(o: &ObjectInstance) -> Vec<[f64; 2]> {
    o.footprint().corners().iter().map(|c| [c.x, c.y]).collect()
}

/// The object a noise-free grounder returns for `cmd`.
pub fn resolve_target<'a>(scene: &'a Scene, cmd: &TargetCommand) -> Option<&'a ObjectInstance> {
    let mut matches: Vec<&ObjectInstance> = scene
        .on_table()
        .filter(|o| o.color == cmd.color && o.category == cmd.category)
        .collect();
    matches.sort_by(|a, b| {
        let an = a.name != cmd.object_name;
        let bn = b.name != cmd.object_name;
        an.cmp(&bn).then_with(|| a.id.cmp(&b.id))
    });
    matches.first().copied()
}

/// Selects the commanded object; with probability `p_wrong_grounding` a
/// distractor is returned instead (same category first, then same color).
pub fn ground_target<R: Rng + ?Sized>(
    scene: &Scene,
    cmd: &TargetCommand,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<GroundingResult, GroundingError> {
    if scene.on_table().next().is_none() {
        return Err(GroundingError::EmptyScene);
    }
    let correct = resolve_target(scene, cmd).ok_or_else(|| GroundingError::NoMatch {
        color: cmd.color.to_string(),
        category: cmd.category.to_string(),
    })?;
    let miss = rng.random::<f64>() < noise.p_wrong_grounding;
    let mut selected = correct;
    if miss {
        let others: Vec<&ObjectInstance> = scene.on_table().filter(|o| o.id != correct.id).collect();
        let same_category: Vec<_> = others
            .iter()
            .copied()
            .filter(|o| o.category == correct.category && o.color != correct.color)
            .collect();
        let same_color: Vec<_> = others
            .iter()
            .copied()
            .filter(|o| o.color == correct.color && o.category != correct.category)
            .collect();
        let pool = if !same_category.is_empty() {
            same_category
        } else if !same_color.is_empty() {
            same_color
        } else {
            others
        };
        if !pool.is_empty() {
            selected = pool[rng.random_range(0..pool.len())];
        }
    }
    Ok(GroundingResult {
        selected_id: selected.id.clone(),
        label: selected.category,
        footprint: footprint_polygon(selected),
    })
}

/// Camera-frame pose and size of the grounded object, perturbed by `noise`.
///
/// The number of random draws is fixed, so the stream position does not
/// depend on which noise terms are enabled.
pub fn estimate_pose_size<R: Rng + ?Sized>(
    scene: &Scene,
    grounding: &GroundingResult,
    noise: &NoiseModel,
    extrinsics: &CameraExtrinsics,
    rng: &mut R,
) -> Result<PoseEstimate, GroundingError> {
    let obj = scene
        .object(&grounding.selected_id)
        .filter(|o| o.is_on_table())
        .ok_or_else(|| GroundingError::NotOnTable(grounding.selected_id.clone()))?;
    let camera_from_base = extrinsics.camera_from_base();
    let truth = obj
        .pose
        .transformed(&camera_from_base, Frame::RobotBase, Frame::Camera)?;

    let mut normal = || rng.sample::<f64, _>(StandardNormal);
    let dt = Vector3::new(normal(), normal(), normal()) * noise.sigma_t;
    let axis_raw = Vector3::new(normal(), normal(), normal());
    let angle = noise.sigma_rot.to_radians() * normal();
    let scale = [normal(), normal(), normal()].map(|z| 1.0 + noise.sigma_size_rel * z);
    let missing_depth = rng.random::<f64>() < noise.p_missing_depth;

    let mut translation = truth.translation + dt;
    if missing_depth {
        translation += camera_from_base.rotation * Vector3::new(0.0, 0.0, noise.depth_lift);
    }
    let rotation = if angle != 0.0 && axis_raw.norm() > 1e-12 {
        let axis = nalgebra::Unit::new_normalize(axis_raw);
        UnitQuaternion::new_normalize(
            *(UnitQuaternion::from_axis_angle(&axis, angle) * truth.rotation).quaternion(),
        )
    } else {
        truth.rotation
    };
    let e = obj.extents.as_array();
    let extents = Extents::new(
        (e[0] * scale[0]).max(MIN_ESTIMATED_EXTENT),
        (e[1] * scale[1]).max(MIN_ESTIMATED_EXTENT),
        (e[2] * scale[2]).max(MIN_ESTIMATED_EXTENT),
    )?;
    Ok(PoseEstimate {
        target_id: obj.id.clone(),
        pose: Pose::new(rotation, translation, Frame::Camera),
        extents,
    })
}

pub fn camera_to_base(
    estimate: &PoseEstimate,
    extrinsics: &CameraExtrinsics,
) -> Result<PoseEstimate, GeometryError> {
    Ok(PoseEstimate {
        pose: estimate
            .pose
            .transformed(extrinsics.base_from_camera(), Frame::Camera, Frame::RobotBase)?,
        ..estimate.clone()
    })
}

pub fn base_to_camera(
    estimate: &PoseEstimate,
    extrinsics: &CameraExtrinsics,
) -> Result<PoseEstimate, GeometryError> {
    Ok(PoseEstimate {
        pose: estimate.pose.transformed(
            &extrinsics.camera_from_base(),
            Frame::RobotBase,
            Frame::Camera,
        )?,
        ..estimate.clone()
    })
}
