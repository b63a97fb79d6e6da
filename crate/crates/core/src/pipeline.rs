//! Grounding, estimation, grasp computation, planning and execution for one
//! confirmed command.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::grasp::{
    compute_grasp_pose, execute, plan_motion, ExecutionOutcome, GraspPose, GripperSpec,
    MotionPlan, PlannerConfig,
};
use crate::llm::TargetCommand;
use crate::perception::{
    camera_to_base, estimate_pose_size, ground_target, CameraExtrinsics, GroundingResult,
    NoiseModel, PoseEstimate,
};
use crate::scene::Scene;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub noise: NoiseModel,
    pub extrinsics: CameraExtrinsics,
    pub gripper: GripperSpec,
    pub planner: PlannerConfig,
}

/// Everything one execution produced, stage by stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecutionReport {
    pub grounding: Option<GroundingResult>,
    /// Robot-base frame estimate.
    pub estimate: Option<PoseEstimate>,
    pub grasp: Option<GraspPose>,
    pub plan: Option<MotionPlan>,
    pub outcome: ExecutionOutcome,
}

impl ExecutionReport {
    fn aborted(
        reason: String,
        grounding: Option<GroundingResult>,
        estimate: Option<PoseEstimate>,
    ) -> Self {
        Self {
            grounding,
            estimate,
            grasp: None,
            plan: None,
            outcome: ExecutionOutcome::aborted(reason),
        }
    }
}

/// Runs the perception and grasp stages against `scene`. Failures of any
/// stage are reported as an aborted outcome, never as an error.
pub fn run_execution<R: Rng + ?Sized>(
    scene: &Scene,
    cmd: &TargetCommand,
    cfg: &PipelineConfig,
    user_slot: usize,
    rng: &mut R,
) -> ExecutionReport {
    let grounding = match ground_target(scene, cmd, &cfg.noise, rng) {
        Ok(g) => g,
        Err(e) => return ExecutionReport::aborted(format!("grounding: {e}"), None, None),
    };
    let estimate = match estimate_pose_size(scene, &grounding, &cfg.noise, &cfg.extrinsics, rng)
        .map_err(|e| e.to_string())
        .and_then(|e| camera_to_base(&e, &cfg.extrinsics).map_err(|e| e.to_string()))
    {
        Ok(e) => e,
        Err(e) => return ExecutionReport::aborted(format!("estimation: {e}"), Some(grounding), None),
    };
    let grasp = match compute_grasp_pose(&estimate, grounding.label, &cfg.gripper, &cfg.planner) {
        Ok(g) => g,
        Err(e) => {
            return ExecutionReport::aborted(format!("grasp: {e}"), Some(grounding), Some(estimate))
        }
    };
    let plan = plan_motion(&grasp, cfg.planner.user_zone(user_slot), &cfg.gripper, &cfg.planner);
    let outcome = execute(
        &plan,
        cmd,
        scene,
        &grounding.selected_id,
        &cfg.gripper,
        &cfg.planner,
    );
    ExecutionReport {
        grounding: Some(grounding),
        estimate: Some(estimate),
        grasp: Some(grasp),
        plan: Some(plan),
        outcome,
    }
}
