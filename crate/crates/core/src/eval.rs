//! Scripted-user trials, the three success metrics and the report table.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::dialogue::{
    classify_target_miss, start_session, DialogueError, Feedback, MissClass, PromptBundle,
};
use crate::grasp::{check_collision, check_reachability, true_grasp_pose, GripperSpec, PlannerConfig, Workspace};
use crate::llm::{
    ChatBackend, FailureInjection, MockScript, RemoteChat, RemoteConfig, ScriptUser, ScriptedMock,
    TargetCommand, TrueTarget,
};
use crate::perception::{CameraExtrinsics, NoiseModel};
use crate::pipeline::PipelineConfig;
use crate::scene::{sample_scene, Catalog, Category, ObjectInstance, Scene, SceneError};
use crate::seed::mix;

pub const OBJECTS_PER_SCENE: usize = 5;
/// Scene redraws before a configuration is declared unsatisfiable.
pub const MAX_SCENE_DRAWS: u64 = 1000;
/// Column order of the report.
pub const TABLE_ORDER: [Category; 3] = [Category::Bowl, Category::Bottle, Category::Mug];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no records to score")]
    Empty,
    #[error("report grid lacks user_count={user_count} category={category}")]
    MissingCell { user_count: usize, category: Category },
    #[error("no usable scene for {category} after {MAX_SCENE_DRAWS} draws")]
    NoScene { category: Category },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parsing run config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("writing csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Run-config file contents.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub noise: NoiseModel,
    pub gripper: GripperSpec,
    pub workspace: Workspace,
    pub llm_failure: FailureInjection,
    pub remote: Option<RemoteConfig>,
    pub planner: Option<PlannerConfig>,
    pub extrinsics: Option<CameraExtrinsics>,
    pub turn_order: TurnOrder,
}

/// How the users of one attempt take turns.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnOrder {
    /// Everyone states a preference first, then each user is served in turn
    /// and asks for their earlier choice.
    #[default]
    Interleaved,
    /// Each user states a preference and is served before the next speaks.
    Sequential,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn pipeline(&self) -> PipelineConfig {
        let mut planner = self.planner.clone().unwrap_or_default();
        planner.workspace = self.workspace;
        PipelineConfig {
            noise: self.noise,
            extrinsics: self.extrinsics.unwrap_or_default(),
            gripper: self.gripper,
            planner,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendChoice {
    Mock,
    Remote(RemoteConfig),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub category: Category,
    pub user_count: usize,
    pub attempts: usize,
    pub seed: u64,
    pub screened: bool,
    pub backend: BackendChoice,
    pub llm_failure: FailureInjection,
    pub pipeline: PipelineConfig,
    /// How often a user restates after rejecting a proposal.
    pub max_restates: usize,
    #[serde(default)]
    pub turn_order: TurnOrder,
}

impl TrialConfig {
    pub fn new(category: Category, user_count: usize) -> Self {
        Self {
            category,
            user_count,
            attempts: 15,
            seed: 0,
            screened: false,
            backend: BackendChoice::Mock,
            llm_failure: FailureInjection::default(),
            pipeline: PipelineConfig::default(),
            max_restates: 1,
            turn_order: TurnOrder::Interleaved,
        }
    }

    pub fn from_run_config(run: &RunConfig, category: Category, user_count: usize) -> Self {
        Self {
            llm_failure: run.llm_failure,
            pipeline: run.pipeline(),
            turn_order: run.turn_order,
            ..Self::new(category, user_count)
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: String| Err(EvalError::InvalidConfig(m));
        if self.attempts == 0 {
            return bad("attempts must be at least 1".into());
        }
        if !(1..=3).contains(&self.user_count) {
            return bad(format!("user_count must be 1, 2 or 3, got {}", self.user_count));
        }
        if !(0.0..=1.0).contains(&self.llm_failure.probability) {
            return bad("llm_failure.probability must lie in [0, 1]".into());
        }
        self.pipeline
            .noise
            .validate()
            .map_err(|e| EvalError::InvalidConfig(e.to_string()))?;
        self.pipeline
            .gripper
            .validate()
            .map_err(|e| EvalError::InvalidConfig(e.to_string()))?;
        Ok(())
    }

    pub fn users(&self) -> Vec<String> {
        (1..=self.user_count).map(|i| format!("user{i}")).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub attempt: usize,
    pub user_count: usize,
    pub category: Category,
    /// The scored user for this attempt.
    pub user: String,
    pub target_name: String,
    pub ins_ok: bool,
    pub vis_ok: bool,
    pub grasp_ok: bool,
    pub miss_class: MissClass,
    /// Execution outcome label, absent when nothing was executed.
    pub outcome: Option<String>,
}

/// Per-attempt seed.
pub fn trial_seed(seed: u64, attempt: usize) -> u64 {
    mix(seed, attempt as u64)
}

fn screened_ok(scene: &Scene, obj: &ObjectInstance, pipeline: &PipelineConfig) -> bool {
    let (g, planner) = (&pipeline.gripper, &pipeline.planner);
    match true_grasp_pose(obj, g, planner) {
        Ok(gp) => {
            check_reachability(&gp, planner) && check_collision(&gp, scene, g, planner, &obj.id).is_none()
        }
        Err(_) => false,
    }
}

/// Samples a scene holding a usable target of `cfg.category` and draws the
/// users' true targets; the scored user's target comes first.
fn draw_scenario(
    cfg: &TrialConfig,
    catalog: &Catalog,
    scene_seed: u64,
) -> Result<(Scene, Vec<ObjectInstance>), EvalError> {
    for k in 0..MAX_SCENE_DRAWS {
        let seed = mix(scene_seed, k);
        let scene = sample_scene(catalog, OBJECTS_PER_SCENE, seed)?;
        let candidates: Vec<&ObjectInstance> = scene
            .on_table()
            .filter(|o| o.category == cfg.category)
            .filter(|o| !cfg.screened || screened_ok(&scene, o, &cfg.pipeline))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, 0x7a));
        let Some(target) = candidates.choose(&mut rng).map(|o| (*o).clone()) else {
            continue;
        };
        let others: Vec<&ObjectInstance> = scene.on_table().filter(|o| o.id != target.id).collect();
        let mut targets = vec![target];
        targets.extend(
            others
                .choose_multiple(&mut rng, cfg.user_count - 1)
                .map(|o| (*o).clone()),
        );
        return Ok((scene, targets));
    }
    Err(EvalError::NoScene {
        category: cfg.category,
    })
}

/// Serving-phase request for an earlier stated preference.
const RECALL_UTTERANCE: &str = "I'm ready for my order now.";

const UTTERANCES: [&str; 3] = [
    "I'd like the {name}, please.",
    "Could you bring me the {name}?",
    "Hmm, the {name} sounds good to me.",
];

struct UserOutcome {
    ins_ok: bool,
    vis_ok: bool,
    grasp_ok: bool,
    miss_class: MissClass,
    outcome: Option<String>,
}

impl UserOutcome {
    fn failed(miss_class: MissClass, outcome: Option<String>) -> Self {
        Self {
            ins_ok: false,
            vis_ok: false,
            grasp_ok: false,
            miss_class,
            outcome,
        }
    }
}

fn run_attempt(
    cfg: &TrialConfig,
    catalog: &Catalog,
    attempt: usize,
    remote: Option<&Arc<dyn ChatBackend>>,
) -> Result<TrialRecord, EvalError> {
    let seed = trial_seed(cfg.seed, attempt);
    let (scene, targets) = draw_scenario(cfg, catalog, mix(seed, 1))?;
    let users = cfg.users();
    let scored_slot = attempt % users.len();
    // targets[0] belongs to the scored user; the rest fill the other slots in order
    let mut by_slot: Vec<Option<&ObjectInstance>> = vec![None; users.len()];
    by_slot[scored_slot] = Some(&targets[0]);
    let mut rest = targets[1..].iter();
    for slot in by_slot.iter_mut().filter(|s| s.is_none()) {
        *slot = rest.next();
    }
    let utterance = |slot: usize, obj: &ObjectInstance| {
        UTTERANCES[(mix(seed, 100 + slot as u64) % UTTERANCES.len() as u64) as usize]
            .replace("{name}", &obj.name)
    };

    let backend: Arc<dyn ChatBackend> = match remote {
        Some(b) => b.clone(),
        None => Arc::new(ScriptedMock::new(MockScript {
            users: users
                .iter()
                .enumerate()
                .map(|(slot, id)| {
                    let obj = by_slot[slot].expect("every slot has a target");
                    ScriptUser {
                        id: id.clone(),
                        utterances: vec![utterance(slot, obj)],
                        true_target: Some(TrueTarget {
                            object: obj.name.clone(),
                            color: obj.color,
                            category: obj.category,
                        }),
                    }
                })
                .collect(),
            failure_injection: FailureInjection {
                seed: mix(seed, 2),
                ..cfg.llm_failure
            },
        })),
    };
    let mut perception_rng = ChaCha8Rng::seed_from_u64(mix(mix(seed, 3), cfg.pipeline.noise.seed));

    let scored_target = &targets[0];
    let mut scored: Option<UserOutcome> = None;
    let mut session = match start_session(backend, PromptBundle::bundled(), scene, users.clone()) {
        Ok(s) => Some(s),
        Err(e) => {
            scored = Some(UserOutcome::failed(MissClass::NoCommand, Some(format!("error: {e}"))));
            None
        }
    };
    if let Some(session) = session.as_mut() {
        let mut order: Vec<usize> = (0..users.len()).collect();
        let mut pending: Option<usize> = None;
        if cfg.turn_order == TurnOrder::Interleaved && users.len() > 1 {
            // each preference supersedes the previous proposal; the last
            // speaker's stays pending, so they are served first
            let mut failed = None;
            for (slot, user) in users.iter().enumerate() {
                let obj = by_slot[slot].expect("every slot has a target");
                if let Err(e) = session.post_user_utterance(user, &utterance(slot, obj)) {
                    failed = Some(e);
                    break;
                }
            }
            if let Some(e) = failed {
                scored = Some(UserOutcome::failed(MissClass::NoCommand, Some(format!("error: {e}"))));
                order.clear();
            } else {
                order.rotate_right(1);
                pending = Some(users.len() - 1);
            }
        }
        for slot in order {
            let user = &users[slot];
            let obj = by_slot[slot].expect("every slot has a target");
            let opening = match (cfg.turn_order, pending) {
                (TurnOrder::Sequential, _) | (_, None) => Opening::Say(utterance(slot, obj)),
                (TurnOrder::Interleaved, Some(p)) if p == slot => Opening::Pending,
                (TurnOrder::Interleaved, Some(_)) => Opening::Say(RECALL_UTTERANCE.to_string()),
            };
            let result = run_user(cfg, session, user, obj, opening, &utterance(slot, obj), &mut perception_rng);
            let outcome = result.unwrap_or_else(|e| {
                UserOutcome::failed(MissClass::NoCommand, Some(format!("error: {e}")))
            });
            let aborted = outcome.outcome.as_deref().is_some_and(|o| o.starts_with("error"));
            if slot == scored_slot {
                scored = Some(outcome);
            }
            if aborted {
                break;
            }
        }
    }
    let scored = scored.unwrap_or_else(|| UserOutcome::failed(MissClass::NoCommand, Some("error: not run".into())));
    Ok(TrialRecord {
        attempt,
        user_count: cfg.user_count,
        category: cfg.category,
        user: users[scored_slot].clone(),
        target_name: scored_target.name.clone(),
        ins_ok: scored.ins_ok,
        vis_ok: scored.vis_ok,
        grasp_ok: scored.grasp_ok,
        miss_class: scored.miss_class,
        outcome: scored.outcome,
    })
}

/// How a user's serving turn begins.
enum Opening {
    Say(String),
    /// Judge the proposal already on the table.
    Pending,
}

/// One scripted user: open the turn, judge proposals (restating the
/// preference after a miss), and on acceptance execute and give feedback.
fn run_user(
    cfg: &TrialConfig,
    session: &mut crate::dialogue::Session,
    user: &str,
    target: &ObjectInstance,
    opening: Opening,
    restatement: &str,
    rng: &mut ChaCha8Rng,
) -> Result<UserOutcome, DialogueError> {
    let expected = TargetCommand::new(&target.name, target.color, target.category, user)
        .expect("catalog names and generated ids are valid");
    let mut first: Option<Option<TargetCommand>> = None;
    let mut last: Option<TargetCommand> = None;
    let mut accepted = false;
    for round in 0..=cfg.max_restates {
        let command = match (&opening, round) {
            (Opening::Pending, 0) => session.state().command().cloned(),
            (Opening::Say(text), 0) => session.post_user_utterance(user, text)?.command,
            _ => session.post_user_utterance(user, restatement)?.command,
        };
        first.get_or_insert_with(|| command.clone());
        let Some(cmd) = command else { continue };
        last = Some(cmd.clone());
        if classify_target_miss(&expected, Some(&cmd)).class == MissClass::Ok {
            session.confirm_target(user, true)?;
            accepted = true;
            break;
        }
        session.confirm_target(user, false)?;
    }
    let miss_class = classify_target_miss(&expected, first.flatten().as_ref()).class;
    let ins_ok = classify_target_miss(&expected, last.as_ref()).class == MissClass::Ok;
    if !(accepted && ins_ok) {
        return Ok(UserOutcome::failed(miss_class, None));
    }
    let report = session.step_execution(&cfg.pipeline, rng)?;
    let vis_ok = report
        .grounding
        .as_ref()
        .is_some_and(|g| g.selected_id == target.id);
    let grasp_ok = report.outcome.is_success() && report.outcome.grasped_id.as_ref() == Some(&target.id);
    session.report_feedback(if grasp_ok { Feedback::Success } else { Feedback::Failure })?;
    Ok(UserOutcome {
        ins_ok,
        vis_ok,
        grasp_ok,
        miss_class,
        outcome: Some(report.outcome.class.label().to_string()),
    })
}

/// Runs `cfg.attempts` independent attempts. Deterministic per config.
pub fn run_trials(cfg: &TrialConfig, catalog: &Catalog) -> Result<Vec<TrialRecord>, EvalError> {
    cfg.validate()?;
    let remote: Option<Arc<dyn ChatBackend>> = match &cfg.backend {
        BackendChoice::Mock => None,
        BackendChoice::Remote(rc) => Some(Arc::new(RemoteChat::new(rc.clone()))),
    };
    (0..cfg.attempts)
        .map(|attempt| run_attempt(cfg, catalog, attempt, remote.as_ref()))
        .collect()
}

/// A success rate in hundredths of a percent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Percent(u32);

impl Percent {
    pub fn from_hundredths(h: u32) -> Self {
        Self(h)
    }

    /// 100·k/n rounded half-up to two decimals.
    pub fn from_counts(k: usize, n: usize) -> Self {
        assert!(n > 0 && k <= n, "need 0 <= k <= n, n > 0");
        let (k, n) = (k as u64, n as u64);
        Self(((20_000 * k + n) / (2 * n)) as u32)
    }

    /// Mean of already-rounded rates, rounded half-up.
    pub fn mean(values: &[Percent]) -> Self {
        assert!(!values.is_empty());
        let sum: u64 = values.iter().map(|p| p.0 as u64).sum();
        let n = values.len() as u64;
        Self(((2 * sum + n) / (2 * n)) as u32)
    }

    pub fn hundredths(&self) -> u32 {
        self.0
    }

    pub fn as_f64(&self) -> f64 {
        self.0 as f64 / 100.0
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02}", self.0 / 100, self.0 % 100)
    }
}

impl Serialize for Percent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Percent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        if !(0.0..=100.0).contains(&v) {
            return Err(serde::de::Error::custom(format!("percentage {v} out of range")));
        }
        Ok(Self((v * 100.0).round() as u32))
    }
}

pub fn success_rate(records: &[TrialRecord], selector: impl Fn(&TrialRecord) -> bool) -> Result<Percent, EvalError> {
    if records.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(Percent::from_counts(records.iter().filter(|r| selector(r)).count(), records.len()))
}

/// Raw success counts of one (user_count, category) cell.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellCounts {
    pub attempts: usize,
    pub ins: usize,
    pub vis: usize,
    pub grasp: usize,
}

impl CellCounts {
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a TrialRecord>) -> Self {
        records.into_iter().fold(Self::default(), |mut c, r| {
            c.attempts += 1;
            c.ins += r.ins_ok as usize;
            c.vis += r.vis_ok as usize;
            c.grasp += r.grasp_ok as usize;
            c
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCell {
    pub category: Category,
    pub ins: Percent,
    pub vis: Percent,
    pub grasp: Percent,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportRow {
    /// Absent on the totals row.
    pub user_count: Option<usize>,
    pub cells: Vec<CategoryCell>,
    pub total_grasp: Percent,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportTable {
    pub rows: Vec<ReportRow>,
    pub totals: ReportRow,
}

/// Builds the table from raw counts. Every row must cover the same
/// categories.
///
/// Row Total-Grasp pools the row's attempts. The totals row averages the
/// rounded row cells, and its Total-Grasp averages the totals-row grasp
/// cells; both round half-up.
pub fn aggregate_counts(grid: &BTreeMap<(usize, Category), CellCounts>) -> Result<ReportTable, EvalError> {
    if grid.is_empty() {
        return Err(EvalError::Empty);
    }
    let user_counts: Vec<usize> = {
        let mut v: Vec<usize> = grid.keys().map(|(u, _)| *u).collect();
        v.dedup();
        v
    };
    let categories: Vec<Category> = TABLE_ORDER
        .into_iter()
        .filter(|c| grid.keys().any(|(_, k)| k == c))
        .collect();
    let mut rows = Vec::new();
    for &u in &user_counts {
        let mut cells = Vec::new();
        let (mut pooled_grasp, mut pooled_attempts) = (0, 0);
        for &category in &categories {
            let c = grid
                .get(&(u, category))
                .filter(|c| c.attempts > 0)
                .ok_or(EvalError::MissingCell { user_count: u, category })?;
            pooled_grasp += c.grasp;
            pooled_attempts += c.attempts;
            cells.push(CategoryCell {
                category,
                ins: Percent::from_counts(c.ins, c.attempts),
                vis: Percent::from_counts(c.vis, c.attempts),
                grasp: Percent::from_counts(c.grasp, c.attempts),
            });
        }
        rows.push(ReportRow {
            user_count: Some(u),
            cells,
            total_grasp: Percent::from_counts(pooled_grasp, pooled_attempts),
        });
    }
    let column = |i: usize, f: fn(&CategoryCell) -> Percent| -> Percent {
        Percent::mean(&rows.iter().map(|r| f(&r.cells[i])).collect::<Vec<_>>())
    };
    let total_cells: Vec<CategoryCell> = categories
        .iter()
        .enumerate()
        .map(|(i, &category)| CategoryCell {
            category,
            ins: column(i, |c| c.ins),
            vis: column(i, |c| c.vis),
            grasp: column(i, |c| c.grasp),
        })
        .collect();
    let total_grasp = Percent::mean(&total_cells.iter().map(|c| c.grasp).collect::<Vec<_>>());
    Ok(ReportTable {
        rows,
        totals: ReportRow {
            user_count: None,
            cells: total_cells,
            total_grasp,
        },
    })
}

pub fn aggregate(records: &[TrialRecord]) -> Result<ReportTable, EvalError> {
    let mut groups: BTreeMap<(usize, Category), Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.user_count, r.category)).or_default().push(r);
    }
    let grid = groups
        .into_iter()
        .map(|(k, v)| (k, CellCounts::from_records(v)))
        .collect();
    aggregate_counts(&grid)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    /// Picks the format from a file extension, defaulting to CSV.
    pub fn from_path(path: impl AsRef<Path>) -> Self {
        match path.as_ref().extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => ReportFormat::Json,
            _ => ReportFormat::Csv,
        }
    }
}

pub const CSV_COLUMNS: [&str; 6] = ["user_count", "category", "ins", "vis", "grasp", "total_grasp"];

impl ReportTable {
    pub fn to_csv(&self) -> Result<String, EvalError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_COLUMNS)?;
        for row in self.rows.iter().chain(std::iter::once(&self.totals)) {
            let users = row.user_count.map_or("total".to_string(), |u| u.to_string());
            for c in &row.cells {
                w.write_record([
                    users.clone(),
                    c.category.to_string(),
                    c.ins.to_string(),
                    c.vis.to_string(),
                    c.grasp.to_string(),
                    row.total_grasp.to_string(),
                ])?;
            }
        }
        let bytes = w.into_inner().map_err(|e| EvalError::Io {
            path: "<memory>".into(),
            source: e.into_error(),
        })?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Plain-text rendering, one line per user count.
    pub fn render(&self) -> String {
        let mut out = String::from("users");
        if let Some(first) = self.rows.first() {
            for c in &first.cells {
                for m in ["ins", "vis", "grasp"] {
                    out += &format!(" | {} {m}", c.category);
                }
            }
        }
        out += " | total grasp\n";
        for row in self.rows.iter().chain(std::iter::once(&self.totals)) {
            out += &row.user_count.map_or("total".to_string(), |u| u.to_string());
            for c in &row.cells {
                out += &format!(" | {} | {} | {}", c.ins, c.vis, c.grasp);
            }
            out += &format!(" | {}\n", row.total_grasp);
        }
        out
    }
}

pub fn export_report(table: &ReportTable, format: ReportFormat, path: impl AsRef<Path>) -> Result<(), EvalError> {
    let path = path.as_ref();
    let text = match format {
        ReportFormat::Csv => table.to_csv()?,
        ReportFormat::Json => table.to_json(),
    };
    std::fs::write(path, text).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })
}
