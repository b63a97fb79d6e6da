mod common;

use nalgebra::Vector3;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use walle_core::geometry::{Extents, Frame, Obb, Pose};
use walle_core::grasp::{
    check_collision, compute_grasp_pose, gripper_sweep, plan_motion, GraspPose, GripperSpec, OutcomeClass,
    Phase, PlannerConfig,
};
use walle_core::llm::TargetCommand;
use walle_core::perception::PoseEstimate;
use walle_core::pipeline::{run_execution, PipelineConfig};
use walle_core::scene::{place_templates, Catalog, Category, Color, ObjectId, Scene, SceneParams};

fn estimate(center: Vector3<f64>, yaw: f64, w: f64, d: f64, h: f64) -> PoseEstimate {
    PoseEstimate {
        target_id: ObjectId::new("obj-00"),
        pose: Pose::upright(yaw, center, Frame::RobotBase),
        extents: Extents::new(w, d, h).unwrap(),
    }
}

proptest! {
    #[test]
    fn bottle_grasp_sits_a_third_up(
        x in 0.2..1.0f64, y in -0.4..0.4f64, base in -0.05..0.2f64,
        diameter in 0.03..0.09f64, h in 0.08..0.35f64, yaw in -3.2..3.2f64,
    ) {
        let e = estimate(Vector3::new(x, y, base + h / 2.0), yaw, diameter, diameter, h);
        let gp = compute_grasp_pose(&e, Category::Bottle, &GripperSpec::default(), &PlannerConfig::default()).unwrap();
        prop_assert!(((gp.point.z - base) - h / 3.0).abs() <= 1e-12);
        prop_assert_eq!(gp.point.x, x);
        prop_assert_eq!(gp.point.y, y);
    }

    #[test]
    fn rim_grasp_lies_on_near_rim(
        x in 0.2..1.0f64, y in -0.4..0.4f64, z in 0.0..0.1f64,
        w in 0.06..0.2f64, shrink in 0.0..0.03f64, h in 0.04..0.14f64,
        yaw in -3.2..3.2f64, mug in any::<bool>(),
    ) {
        let cfg = PlannerConfig::default();
        let category = if mug { Category::Mug } else { Category::Bowl };
        let e = estimate(Vector3::new(x, y, z), yaw, w, w - shrink, h);
        let gp = compute_grasp_pose(&e, category, &GripperSpec::default(), &cfg).unwrap();
        let off = gp.point.xy() - Vector3::new(x, y, z).xy();
        prop_assert!((off.norm() - (w - shrink) / 2.0).abs() <= 1e-9);
        prop_assert!((gp.point.z - (z + h / 2.0 - cfg.rim_engage)).abs() <= 1e-12);
        prop_assert!(off.x * -x + off.y * -y > 0.0);
    }

    #[test]
    fn plan_keeps_one_orientation(
        x in 0.35..0.85f64, y in -0.4..0.4f64, z in 0.02..0.2f64,
        yaw in -3.2..3.2f64, slot in 0usize..3,
    ) {
        let g = GripperSpec::default();
        let cfg = PlannerConfig::default();
        let gp = GraspPose { point: Vector3::new(x, y, z), closing_yaw: yaw };
        prop_assert_eq!(gp.approach(), -Vector3::z());
        let plan = plan_motion(&gp, cfg.user_zone(slot), &g, &cfg);
        prop_assert!(plan.rotation_constant());
        let phases: Vec<Phase> = plan.waypoints.iter().map(|w| w.phase).collect();
        prop_assert_eq!(phases, Phase::ORDER.to_vec());
        let first = plan.waypoints[0].rotation;
        for w in &plan.waypoints {
            prop_assert_eq!(w.rotation, first);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sat_agrees_with_sampling_oracle(
        px in 0.3..0.9f64, py in -0.3..0.3f64, pz in 0.03..0.2f64, yaw in -3.2..3.2f64,
        hx in 0.015..0.08f64, hy in 0.015..0.08f64, hz in 0.015..0.08f64,
        ox in -0.15..0.15f64, oy in -0.12..0.12f64, oz in -0.08..0.3f64, seed in any::<u64>(),
    ) {
        let (g, cfg) = (GripperSpec::default(), PlannerConfig::default());
        let gp = GraspPose { point: Vector3::new(px, py, pz), closing_yaw: yaw };
        let rot = common::random_rotation(&mut ChaCha8Rng::seed_from_u64(seed));
        let pose = common::base_pose(rot, gp.point + Vector3::new(ox, oy, oz));
        let obj = common::object("obj-01", Category::Bowl, Color::Blue, pose, Extents::new(2.0 * hx, 2.0 * hy, 2.0 * hz).unwrap());
        let h = 0.004;
        let verdict = common::robust_verdict(&gripper_sweep(&gp, &g, &cfg), &Obb::from_pose(&pose, &obj.extents), h, 3.0 * h);
        prop_assume!(verdict.is_some());
        let scene = Scene::new(Default::default(), vec![obj], 0);
        let sat = check_collision(&gp, &scene, &g, &cfg, &ObjectId::new("obj-00")).is_some();
        prop_assert_eq!(Some(sat), verdict);
    }
}

fn lone(name: &str) -> Scene {
    let c = Catalog::bundled();
    let mut s = place_templates(&[c.get(name).unwrap()], 1, &SceneParams::default()).unwrap();
    s.objects[0].pose.translation.x = 0.55;
    s.objects[0].pose.translation.y = 0.05;
    s
}

#[test]
fn missing_depth_failures_grow_with_lift() {
    for (name, color, category) in [
        ("white bowl", Color::White, Category::Bowl),
        ("white mug", Color::White, Category::Mug),
        ("grape juice", Color::Purple, Category::Bottle),
    ] {
        let scene = lone(name);
        let cmd = TargetCommand::new(name, color, category, "user1").unwrap();
        let mut cfg = PipelineConfig::default();
        cfg.noise.p_missing_depth = 1.0;
        let outcomes: Vec<bool> = (0..=80)
            .map(|mm| {
                cfg.noise.depth_lift = mm as f64 / 1000.0;
                run_execution(&scene, &cmd, &cfg, 0, &mut ChaCha8Rng::seed_from_u64(1)).outcome.is_success()
            })
            .collect();
        assert!(outcomes[0], "{name}: zero lift should succeed");
        let first_fail = outcomes.iter().position(|ok| !ok).expect("large lift fails");
        assert!(outcomes[first_fail..].iter().all(|ok| !ok), "{name}: {outcomes:?}");
        cfg.noise.depth_lift = 0.08;
        let r = run_execution(&scene, &cmd, &cfg, 0, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(matches!(r.outcome.class, OutcomeClass::Dropped | OutcomeClass::Collision { .. }), "{:?}", r.outcome);
    }
}
