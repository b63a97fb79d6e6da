use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use walle_bench::{boxes, drinks_scene};
use walle_core::eval::{run_trials, TrialConfig};
use walle_core::grasp::{check_collision, true_grasp_pose, GripperSpec, PlannerConfig};
use walle_core::llm::{format_target_command, parse_target_command, TargetCommand};
use walle_core::scene::{footprint_overlap, sample_scene, Catalog, Category, Color};

fn sat(c: &mut Criterion) {
    let b = boxes(64);
    c.bench_function("obb_intersects_64x64", |bench| {
        bench.iter(|| {
            let mut hits = 0;
            for x in &b {
                for y in &b {
                    hits += black_box(x).intersects(black_box(y)) as usize;
                }
            }
            hits
        })
    });
    let scene = drinks_scene(1);
    let (g, cfg) = (GripperSpec::default(), PlannerConfig::default());
    let target = &scene.objects[2];
    let gp = true_grasp_pose(target, &g, &cfg).unwrap();
    c.bench_function("check_collision_5_objects", |bench| {
        bench.iter(|| check_collision(black_box(&gp), &scene, &g, &cfg, &target.id))
    });
}

fn footprint(c: &mut Criterion) {
    let scene = drinks_scene(2);
    c.bench_function("footprint_overlap_all_pairs", |bench| {
        bench.iter(|| {
            let objs = &scene.objects;
            let mut n = 0;
            for i in 0..objs.len() {
                for j in i + 1..objs.len() {
                    n += footprint_overlap(black_box(&objs[i]), black_box(&objs[j])) as usize;
                }
            }
            n
        })
    });
    let catalog = Catalog::bundled();
    let mut seed = 0;
    c.bench_function("sample_scene_5", |bench| {
        bench.iter(|| {
            seed += 1;
            sample_scene(&catalog, 5, seed).unwrap()
        })
    });
}

fn parse(c: &mut Criterion) {
    let cmd = TargetCommand::new("grape juice", Color::Purple, Category::Bottle, "user2").unwrap();
    let reply = format!("Sure, here it comes.\n{}\n", format_target_command(&cmd));
    c.bench_function("parse_target_command", |bench| bench.iter(|| parse_target_command(black_box(&reply))));
}

fn trials(c: &mut Criterion) {
    let catalog = Catalog::bundled();
    let mut cfg = TrialConfig::new(Category::Mug, 3);
    cfg.pipeline.noise.sigma_t = 0.005;
    c.bench_function("run_trials_15_mug_3_users", |bench| bench.iter(|| run_trials(&cfg, &catalog).unwrap()));
}

criterion_group!(benches, sat, footprint, parse, trials);
criterion_main!(benches);
