//! Category-level top grasps, gripper-sweep collision, a workspace-box
//! reachability predicate, waypoint planning and simulated execution.

use std::f64::consts::PI;

use nalgebra::{UnitQuaternion, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Frame, GeometryError, Obb};
use crate::llm::TargetCommand;
use crate::perception::PoseEstimate;
use crate::scene::{Category, ObjectId, ObjectInstance, Scene};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraspError {
    #[error("caliber {caliber:.4} m exceeds usable opening {opening:.4} m")]
    Ungraspable { caliber: f64, opening: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid gripper spec: {0}")]
    InvalidGripper(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GripperSpec {
    pub max_opening: f64,
    pub finger_length: f64,
    pub finger_thickness: f64,
    pub finger_width: f64,
    pub palm_clearance: f64,
}

impl Default for GripperSpec {
    fn default() -> Self {
        Self {
            max_opening: 0.10,
            finger_length: 0.045,
            finger_thickness: 0.01,
            finger_width: 0.02,
            palm_clearance: 0.03,
        }
    }
}

impl GripperSpec {
    pub fn validate(&self) -> Result<(), GraspError> {
        let all = [
            self.max_opening,
            self.finger_length,
            self.finger_thickness,
            self.finger_width,
            self.palm_clearance,
        ];
        if !all.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(GraspError::InvalidGripper("dimensions must be positive"));
        }
        if self.max_opening <= self.finger_thickness {
            return Err(GraspError::InvalidGripper("max_opening must exceed finger_thickness"));
        }
        Ok(())
    }
}

/// Closed axis-aligned box in the robot base frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Default for Workspace {
    fn default() -> Self {
        Self {
            min: [0.3, -0.5, 0.0],
            max: [0.9, 0.5, 0.4],
        }
    }
}

impl Workspace {
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub clear_height: f64,
    /// Depth below the rim at which bowl and mug grasps close.
    pub rim_engage: f64,
    pub rim_thickness: f64,
    /// Required spare opening around a bottle body.
    pub caliber_margin: f64,
    pub z_tol: f64,
    pub workspace: Workspace,
    /// Hand-over points, one per user slot.
    pub user_zones: Vec<[f64; 3]>,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            clear_height: 0.10,
            rim_engage: 0.015,
            rim_thickness: 0.006,
            caliber_margin: 0.005,
            z_tol: 0.02,
            workspace: Workspace::default(),
            user_zones: vec![[0.45, -0.35, 0.30], [0.60, 0.0, 0.35], [0.45, 0.35, 0.30]],
        }
    }
}

impl PlannerConfig {
    pub fn user_zone(&self, slot: usize) -> Vector3<f64> {
        match self.user_zones.len() {
            0 => Vector3::new(0.5, 0.0, 0.3),
            n => Vector3::from(self.user_zones[slot % n]),
        }
    }
}

/// A top grasp. The approach direction is always straight down.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspPose {
    pub point: Vector3<f64>,
    /// Yaw of the closing axis about +z.
    pub closing_yaw: f64,
}

impl GraspPose {
    pub fn approach(&self) -> Vector3<f64> {
        -Vector3::z()
    }

    pub fn closing_axis(&self) -> Vector3<f64> {
        Vector3::new(self.closing_yaw.cos(), self.closing_yaw.sin(), 0.0)
    }

    /// Gripper orientation: tool z along the approach, tool x along the closing axis.
    pub fn rotation(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_axis_angle(&Vector3::z_axis(), self.closing_yaw)
            * UnitQuaternion::from_axis_angle(&Vector3::x_axis(), PI)
    }

    pub fn pre_grasp(&self, cfg: &PlannerConfig) -> Vector3<f64> {
        self.point + Vector3::new(0.0, 0.0, cfg.clear_height)
    }
}

/// Unit horizontal vector from `center` toward the base origin (+x at the origin).
pub fn radial_toward_base(center: &Vector3<f64>) -> Vector2<f64> {
    let v = -center.xy();
    let n = v.norm();
    if n > 1e-12 {
        v / n
    } else {
        Vector2::x()
    }
}

#[allow(clippy::too_many_arguments)]
fn grasp_from_box(
    center: Vector3<f64>,
    width: f64,
    depth: f64,
    height: f64,
    caliber: f64,
    category: Category,
    g: &GripperSpec,
    cfg: &PlannerConfig,
) -> Result<GraspPose, GraspError> {
    match category {
        Category::Bottle => {
            let opening = g.max_opening - cfg.caliber_margin;
            if caliber > opening {
                return Err(GraspError::Ungraspable { caliber, opening });
            }
            Ok(GraspPose {
                point: Vector3::new(center.x, center.y, center.z - height / 6.0),
                closing_yaw: 0.0,
            })
        }
        Category::Bowl | Category::Mug => {
            if cfg.rim_thickness > g.max_opening {
                return Err(GraspError::Ungraspable {
                    caliber: cfg.rim_thickness,
                    opening: g.max_opening,
                });
            }
            // The rim circle ignores a mug handle.
            let radius = width.min(depth) / 2.0;
            let d = radial_toward_base(&center);
            Ok(GraspPose {
                point: Vector3::new(
                    center.x + d.x * radius,
                    center.y + d.y * radius,
                    center.z + height / 2.0 - cfg.rim_engage,
                ),
                closing_yaw: d.y.atan2(d.x),
            })
        }
    }
}

pub fn compute_grasp_pose(
    e: &PoseEstimate,
    category: Category,
    g: &GripperSpec,
    cfg: &PlannerConfig,
) -> Result<GraspPose, GraspError> {
    e.pose.expect_frame(Frame::RobotBase)?;
    let (w, d, h) = (e.extents.width(), e.extents.depth(), e.extents.height());
    grasp_from_box(e.pose.translation, w, d, h, w.min(d), category, g, cfg)
}

/// The grasp the policy would compute from perfect knowledge of `obj`.
pub fn true_grasp_pose(
    obj: &ObjectInstance,
    g: &GripperSpec,
    cfg: &PlannerConfig,
) -> Result<GraspPose, GraspError> {
    let e = &obj.extents;
    grasp_from_box(
        obj.pose.translation,
        e.width(),
        e.depth(),
        e.height(),
        obj.body_diameter,
        obj.category,
        g,
        cfg,
    )
}

pub fn check_reachability(gp: &GraspPose, cfg: &PlannerConfig) -> bool {
    cfg.workspace.contains(&gp.point) && cfg.workspace.contains(&gp.pre_grasp(cfg))
}

/// Finger and palm boxes swept from the pre-grasp height down to the grasp.
/// The fingers sit fully open at ±(opening/2 + thickness/2) on the closing axis.
pub fn gripper_sweep(gp: &GraspPose, g: &GripperSpec, cfg: &PlannerConfig) -> [Obb; 3] {
    let rot = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), gp.closing_yaw);
    let axis = gp.closing_axis();
    let offset = g.max_opening / 2.0 + g.finger_thickness / 2.0;
    let finger_bottom = gp.point.z - g.finger_length / 2.0;
    let finger_top = gp.point.z + g.finger_length / 2.0 + cfg.clear_height;
    let finger_half = Vector3::new(
        g.finger_thickness / 2.0,
        g.finger_width / 2.0,
        (finger_top - finger_bottom) / 2.0,
    );
    let finger_z = (finger_top + finger_bottom) / 2.0;
    let finger = |sign: f64| {
        let c = gp.point + axis * (sign * offset);
        Obb::new(Vector3::new(c.x, c.y, finger_z), &rot, finger_half)
    };
    let palm_bottom = gp.point.z + g.finger_length / 2.0;
    let palm_top = palm_bottom + g.palm_clearance + cfg.clear_height;
    let palm = Obb::new(
        Vector3::new(gp.point.x, gp.point.y, (palm_top + palm_bottom) / 2.0),
        &rot,
        Vector3::new(
            g.max_opening / 2.0 + g.finger_thickness,
            g.finger_width / 2.0,
            (palm_top - palm_bottom) / 2.0,
        ),
    );
    [finger(1.0), finger(-1.0), palm]
}

/// First physical object other than `exclude` hit by the gripper sweep.
pub fn check_collision(
    gp: &GraspPose,
    scene: &Scene,
    g: &GripperSpec,
    cfg: &PlannerConfig,
    exclude: &ObjectId,
) -> Option<ObjectId> {
    let sweep = gripper_sweep(gp, g, cfg);
    scene
        .objects
        .iter()
        .filter(|o| o.is_physical() && &o.id != exclude)
        .find(|o| {
            let obb = Obb::from_pose(&o.pose, &o.extents);
            sweep.iter().any(|b| b.intersects(&obb))
        })
        .map(|o| o.id.clone())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    PreGrasp,
    Descend,
    Close,
    Lift,
    MoveToUser,
    Open,
}

impl Phase {
    pub const ORDER: [Phase; 6] = [
        Phase::PreGrasp,
        Phase::Descend,
        Phase::Close,
        Phase::Lift,
        Phase::MoveToUser,
        Phase::Open,
    ];
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub phase: Phase,
    pub position: [f64; 3],
    /// Scalar-last quaternion.
    pub rotation: [f64; 4],
    pub aperture: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionPlan {
    pub grasp: GraspPose,
    pub waypoints: Vec<Waypoint>,
}

impl MotionPlan {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.waypoints).expect("waypoints serialize")
    }

    /// True when every waypoint carries the same orientation.
    pub fn rotation_constant(&self) -> bool {
        self.waypoints
            .windows(2)
            .all(|w| w[0].rotation == w[1].rotation)
    }
}

pub fn plan_motion(
    gp: &GraspPose,
    user_zone: Vector3<f64>,
    g: &GripperSpec,
    cfg: &PlannerConfig,
) -> MotionPlan {
    let q = gp.rotation();
    let rotation = [q.i, q.j, q.k, q.w];
    let above = gp.pre_grasp(cfg);
    let (open, closed) = (g.max_opening, 0.0);
    let waypoints = Phase::ORDER
        .iter()
        .map(|&phase| {
            let (p, aperture) = match phase {
                Phase::PreGrasp => (above, open),
                Phase::Descend => (gp.point, open),
                Phase::Close => (gp.point, closed),
                Phase::Lift => (above, closed),
                Phase::MoveToUser => (user_zone, closed),
                Phase::Open => (user_zone, open),
            };
            Waypoint {
                phase,
                position: [p.x, p.y, p.z],
                rotation,
                aperture,
            }
        })
        .collect();
    MotionPlan {
        grasp: *gp,
        waypoints,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum OutcomeClass {
    Success,
    WrongObject,
    Collision { blocking_id: ObjectId },
    Unreachable,
    Dropped,
    /// Nothing was executed: grounding or grasp computation failed.
    Aborted { reason: String },
}

impl OutcomeClass {
    pub fn label(&self) -> &'static str {
        match self {
            OutcomeClass::Success => "success",
            OutcomeClass::WrongObject => "wrong_object",
            OutcomeClass::Collision { .. } => "collision",
            OutcomeClass::Unreachable => "unreachable",
            OutcomeClass::Dropped => "dropped",
            OutcomeClass::Aborted { .. } => "aborted",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    #[serde(flatten)]
    pub class: OutcomeClass,
    pub grasped_id: Option<ObjectId>,
}

impl ExecutionOutcome {
    pub fn aborted(reason: impl Into<String>) -> Self {
        Self {
            class: OutcomeClass::Aborted {
                reason: reason.into(),
            },
            grasped_id: None,
        }
    }

    pub fn is_success(&self) -> bool {
        self.class == OutcomeClass::Success
    }

    fn without_grasp(class: OutcomeClass) -> Self {
        Self {
            class,
            grasped_id: None,
        }
    }
}

/// Whether `point` would hold `obj`, judged against its true geometry.
pub fn within_success_window(
    point: &Vector3<f64>,
    obj: &ObjectInstance,
    g: &GripperSpec,
    cfg: &PlannerConfig,
) -> bool {
    let Ok(required) = true_grasp_pose(obj, g, cfg) else {
        return false;
    };
    let caliber = match obj.category {
        Category::Bottle => obj.body_diameter,
        Category::Bowl | Category::Mug => cfg.rim_thickness,
    };
    let slack = (g.max_opening - caliber) / 2.0;
    let horizontal = (point.xy() - required.point.xy()).norm();
    let vertical = (point.z - required.point.z).abs();
    horizontal <= slack && vertical <= cfg.z_tol && point.z <= obj.top_z()
}

/// Simulates the plan against the true scene. Never fails; every failure is
/// an outcome. Scene events are left to the caller.
pub fn execute(
    plan: &MotionPlan,
    cmd: &TargetCommand,
    scene_truth: &Scene,
    grounded_id: &ObjectId,
    g: &GripperSpec,
    cfg: &PlannerConfig,
) -> ExecutionOutcome {
    let gp = &plan.grasp;
    if !check_reachability(gp, cfg) {
        return ExecutionOutcome::without_grasp(OutcomeClass::Unreachable);
    }
    if let Some(blocking_id) = check_collision(gp, scene_truth, g, cfg, grounded_id) {
        return ExecutionOutcome::without_grasp(OutcomeClass::Collision { blocking_id });
    }
    let Some(obj) = scene_truth.object(grounded_id) else {
        return ExecutionOutcome::aborted(format!("unknown object {grounded_id}"));
    };
    if obj.color != cmd.color || obj.category != cmd.category {
        return ExecutionOutcome {
            class: OutcomeClass::WrongObject,
            grasped_id: Some(obj.id.clone()),
        };
    }
    if !within_success_window(&gp.point, obj, g, cfg) {
        return ExecutionOutcome::without_grasp(OutcomeClass::Dropped);
    }
    ExecutionOutcome {
        class: OutcomeClass::Success,
        grasped_id: Some(obj.id.clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Extents, Pose};
    use crate::scene::{Color, ObjectState, Table};

    fn estimate(center: [f64; 3], w: f64, d: f64, h: f64) -> PoseEstimate {
        PoseEstimate {
            target_id: ObjectId::new("obj-00"),
            pose: Pose::upright(0.0, Vector3::from(center), Frame::RobotBase),
            extents: Extents::new(w, d, h).unwrap(),
        }
    }

    fn object(id: &str, category: Category, color: Color, center: [f64; 3], ext: [f64; 3]) -> ObjectInstance {
        ObjectInstance {
            id: ObjectId::new(id),
            name: format!("{color} {category}"),
            category,
            color,
            pose: Pose::upright(0.0, Vector3::from(center), Frame::RobotBase),
            extents: Extents::new(ext[0], ext[1], ext[2]).unwrap(),
            body_diameter: ext[0].min(ext[1]),
            semantic: String::new(),
            state: ObjectState::OnTable,
        }
    }

    fn defaults() -> (GripperSpec, PlannerConfig) {
        (GripperSpec::default(), PlannerConfig::default())
    }

    #[test]
    fn bottle_grasp_at_third_height() {
        let (g, cfg) = defaults();
        let gp = compute_grasp_pose(&estimate([0.5, 0.0, 0.12], 0.066, 0.066, 0.24), Category::Bottle, &g, &cfg).unwrap();
        assert!((gp.point - Vector3::new(0.5, 0.0, 0.08)).norm() < 1e-12);
        assert_eq!(gp.closing_yaw, 0.0);
        assert_eq!(gp.approach(), Vector3::new(0.0, 0.0, -1.0));
    }

    #[test]
    fn bowl_grasp_on_near_rim() {
        let (g, cfg) = defaults();
        let gp = compute_grasp_pose(&estimate([0.4, 0.0, 0.04], 0.14, 0.14, 0.08), Category::Bowl, &g, &cfg).unwrap();
        assert!((gp.point - Vector3::new(0.33, 0.0, 0.065)).norm() < 1e-12);
        assert!((gp.closing_axis() - Vector3::new(-1.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn rim_direction_at_origin_is_plus_x() {
        let (g, cfg) = defaults();
        let gp = compute_grasp_pose(&estimate([0.0, 0.0, 0.04], 0.1, 0.1, 0.08), Category::Mug, &g, &cfg).unwrap();
        assert!((gp.point.x - 0.05).abs() < 1e-12);
    }

    #[test]
    fn fat_bottle_is_ungraspable() {
        let (g, cfg) = defaults();
        let err = compute_grasp_pose(&estimate([0.5, 0.0, 0.12], 0.2, 0.2, 0.24), Category::Bottle, &g, &cfg);
        assert!(matches!(err, Err(GraspError::Ungraspable { .. })));
    }

    #[test]
    fn camera_frame_estimate_rejected() {
        let (g, cfg) = defaults();
        let mut e = estimate([0.5, 0.0, 0.12], 0.06, 0.06, 0.24);
        e.pose.frame = Frame::Camera;
        assert!(matches!(
            compute_grasp_pose(&e, Category::Bottle, &g, &cfg),
            Err(GraspError::Geometry(GeometryError::FrameMismatch { .. }))
        ));
    }

    #[test]
    fn reachability_box() {
        let cfg = PlannerConfig::default();
        let at = |x, y, z| GraspPose { point: Vector3::new(x, y, z), closing_yaw: 0.0 };
        assert!(check_reachability(&at(0.5, 0.0, 0.08), &cfg));
        assert!(!check_reachability(&at(1.5, 0.0, 0.08), &cfg));
        assert!(check_reachability(&at(0.3, 0.5, 0.0), &cfg));
        // pre-grasp leaves the box
        assert!(!check_reachability(&at(0.5, 0.0, 0.35), &cfg));
    }

    #[test]
    fn lone_object_has_no_collision() {
        let (g, cfg) = defaults();
        let o = object("obj-00", Category::Bottle, Color::Red, [0.5, 0.0, 0.12], [0.066, 0.066, 0.24]);
        let scene = Scene::new(Table::default(), vec![o.clone()], 0);
        let gp = true_grasp_pose(&o, &g, &cfg).unwrap();
        assert_eq!(check_collision(&gp, &scene, &g, &cfg, &o.id), None);
    }

    #[test]
    fn distractor_inside_finger_collides() {
        let (g, cfg) = defaults();
        let o = object("obj-00", Category::Bottle, Color::Red, [0.5, 0.0, 0.12], [0.066, 0.066, 0.24]);
        let gp = true_grasp_pose(&o, &g, &cfg).unwrap();
        let finger_x = 0.5 + g.max_opening / 2.0 + g.finger_thickness / 2.0;
        let d = object("obj-01", Category::Mug, Color::Blue, [finger_x, 0.0, 0.06], [0.004, 0.004, 0.004]);
        let scene = Scene::new(Table::default(), vec![o.clone(), d], 0);
        assert_eq!(check_collision(&gp, &scene, &g, &cfg, &o.id), Some(ObjectId::new("obj-01")));
    }

    #[test]
    fn delivered_objects_do_not_collide() {
        let (g, cfg) = defaults();
        let o = object("obj-00", Category::Bottle, Color::Red, [0.5, 0.0, 0.12], [0.066, 0.066, 0.24]);
        let gp = true_grasp_pose(&o, &g, &cfg).unwrap();
        let mut d = object("obj-01", Category::Mug, Color::Blue, [0.56, 0.0, 0.06], [0.01, 0.01, 0.01]);
        d.state = ObjectState::Delivered;
        let scene = Scene::new(Table::default(), vec![o.clone(), d], 0);
        assert_eq!(check_collision(&gp, &scene, &g, &cfg, &o.id), None);
    }

    #[test]
    fn plan_has_six_ordered_phases_with_one_rotation() {
        let (g, cfg) = defaults();
        let gp = GraspPose { point: Vector3::new(0.5, 0.1, 0.08), closing_yaw: 0.7 };
        let plan = plan_motion(&gp, cfg.user_zone(1), &g, &cfg);
        let phases: Vec<_> = plan.waypoints.iter().map(|w| w.phase).collect();
        assert_eq!(phases, Phase::ORDER);
        assert!(plan.rotation_constant());
        let apertures: Vec<_> = plan.waypoints.iter().map(|w| w.aperture).collect();
        assert_eq!(apertures, [0.1, 0.1, 0.0, 0.0, 0.0, 0.1]);
        assert!((plan.waypoints[0].position[2] - 0.18).abs() < 1e-12);
        let q = gp.rotation();
        assert!((q * Vector3::z() - gp.approach()).norm() < 1e-12);
        assert!((q * Vector3::x() - gp.closing_axis()).norm() < 1e-12);
        let json: serde_json::Value = serde_json::from_str(&plan.to_json()).unwrap();
        assert_eq!(json.as_array().unwrap().len(), 6);
        assert_eq!(json[4]["phase"], "move_to_user");
    }

    fn run(scene: &Scene, cmd: &TargetCommand, grounded: &str, gp: GraspPose) -> ExecutionOutcome {
        let (g, cfg) = defaults();
        let plan = plan_motion(&gp, cfg.user_zone(0), &g, &cfg);
        execute(&plan, cmd, scene, &ObjectId::new(grounded), &g, &cfg)
    }

    #[test]
    fn execute_outcomes() {
        let (g, cfg) = defaults();
        let purple = object("obj-00", Category::Bottle, Color::Purple, [0.5, 0.0, 0.115], [0.068, 0.068, 0.23]);
        let red = object("obj-01", Category::Bottle, Color::Red, [0.5, 0.25, 0.12], [0.066, 0.066, 0.24]);
        let scene = Scene::new(Table::default(), vec![purple.clone(), red.clone()], 0);
        let cmd = TargetCommand::new("grape juice", Color::Purple, Category::Bottle, "user1").unwrap();

        let ok = run(&scene, &cmd, "obj-00", true_grasp_pose(&purple, &g, &cfg).unwrap());
        assert!(ok.is_success());
        assert_eq!(ok.grasped_id, Some(purple.id.clone()));

        let wrong = run(&scene, &cmd, "obj-01", true_grasp_pose(&red, &g, &cfg).unwrap());
        assert_eq!(wrong.class, OutcomeClass::WrongObject);

        let mut lifted = true_grasp_pose(&purple, &g, &cfg).unwrap();
        lifted.point.z += 0.03;
        assert_eq!(run(&scene, &cmd, "obj-00", lifted).class, OutcomeClass::Dropped);

        let mut far = lifted;
        far.point.x = 1.5;
        assert_eq!(run(&scene, &cmd, "obj-00", far).class, OutcomeClass::Unreachable);

        let mut shifted = true_grasp_pose(&purple, &g, &cfg).unwrap();
        shifted.point.y = 0.22;
        assert_eq!(
            run(&scene, &cmd, "obj-00", shifted).class,
            OutcomeClass::Collision { blocking_id: red.id.clone() }
        );
    }

    #[test]
    fn success_window_edges() {
        let (g, cfg) = defaults();
        let o = object("obj-00", Category::Bottle, Color::Red, [0.5, 0.0, 0.12], [0.06, 0.06, 0.24]);
        let req = true_grasp_pose(&o, &g, &cfg).unwrap().point;
        let slack = (g.max_opening - 0.06) / 2.0;
        assert!(within_success_window(&(req + Vector3::new(slack * 0.99, 0.0, 0.0)), &o, &g, &cfg));
        assert!(!within_success_window(&(req + Vector3::new(slack * 1.01, 0.0, 0.0)), &o, &g, &cfg));
        assert!(within_success_window(&(req - Vector3::new(0.0, 0.0, 0.0199)), &o, &g, &cfg));
        let mug = object("obj-01", Category::Mug, Color::Red, [0.5, 0.0, 0.04], [0.11, 0.08, 0.08]);
        let top = Vector3::new(0.46, 0.0, mug.top_z() + 0.001);
        assert!(!within_success_window(&top, &mug, &g, &cfg));
    }

    #[test]
    fn outcome_json_shape() {
        let o = ExecutionOutcome {
            class: OutcomeClass::Collision { blocking_id: ObjectId::new("obj-02") },
            grasped_id: None,
        };
        let v: serde_json::Value = serde_json::to_value(&o).unwrap();
        assert_eq!(v["class"], "collision");
        assert_eq!(v["blocking_id"], "obj-02");
        let back: ExecutionOutcome = serde_json::from_value(v).unwrap();
        assert_eq!(back, o);
    }

    #[test]
    fn gripper_validation() {
        assert!(GripperSpec::default().validate().is_ok());
        let bad = GripperSpec { max_opening: 0.005, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = GripperSpec { finger_width: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
