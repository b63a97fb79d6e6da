//! Fixtures shared by the benchmarks.

use nalgebra::{UnitQuaternion, Vector3};
use walle_core::geometry::Obb;
use walle_core::scene::{place_templates, Catalog, Scene, SceneParams};

/// A deterministic spread of tilted boxes around the workspace center.
pub fn boxes(n: usize) -> Vec<Obb> {
    (0..n)
        .map(|i| {
            let t = i as f64;
            let rot = UnitQuaternion::from_euler_angles(0.3 * t, 0.7 * t, 1.1 * t);
            let center = Vector3::new(0.6 + 0.05 * (t * 0.9).sin(), 0.05 * (t * 1.3).cos(), 0.1);
            Obb::new(center, &rot, Vector3::new(0.02 + 0.001 * (i % 7) as f64, 0.03, 0.05))
        })
        .collect()
}

/// Five drinks on the table.
pub fn drinks_scene(seed: u64) -> Scene {
    let catalog = Catalog::bundled();
    let names = ["coca", "apple juice", "grape juice", "soda", "milk"];
    let entries: Vec<_> = names.iter().map(|n| catalog.get(n).expect("bundled entry")).collect();
    place_templates(&entries, seed, &SceneParams::default()).expect("drinks fit on the table")
}
