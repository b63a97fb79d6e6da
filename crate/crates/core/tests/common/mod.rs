#![allow(dead_code)]

use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use walle_core::geometry::{Extents, Frame, Obb, Pose};
use walle_core::scene::{Category, Color, ObjectId, ObjectInstance, ObjectState};

/// Uniformly distributed rotation (normalized Gaussian quaternion).
pub fn random_rotation<R: Rng>(rng: &mut R) -> UnitQuaternion<f64> {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 1e-6 {
            return UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[3], q[0], q[1], q[2]));
        }
    }
}

pub fn object(id: &str, category: Category, color: Color, pose: Pose, extents: Extents) -> ObjectInstance {
    ObjectInstance {
        id: ObjectId::new(id),
        name: format!("{color} {category}"),
        category,
        color,
        body_diameter: extents.width().min(extents.depth()),
        pose,
        extents,
        semantic: String::new(),
        state: ObjectState::OnTable,
    }
}

/// Lattice points covering `b` with spacing at most `h`, faces included.
pub fn lattice(b: &Obb, h: f64) -> Vec<Vector3<f64>> {
    let steps: [usize; 3] = std::array::from_fn(|i| ((2.0 * b.half[i]) / h).ceil().max(1.0) as usize);
    let mut pts = Vec::with_capacity((steps[0] + 1) * (steps[1] + 1) * (steps[2] + 1));
    for i in 0..=steps[0] {
        for j in 0..=steps[1] {
            for k in 0..=steps[2] {
                let u = [i, j, k]
                    .iter()
                    .zip(steps)
                    .enumerate()
                    .map(|(a, (n, s))| b.half[a] * (2.0 * (*n as f64) / s as f64 - 1.0))
                    .collect::<Vec<_>>();
                pts.push(b.center + b.axis(0) * u[0] + b.axis(1) * u[1] + b.axis(2) * u[2]);
            }
        }
    }
    pts
}

/// Point-membership test in the box's own frame.
pub fn inside(b: &Obb, p: &Vector3<f64>) -> bool {
    let local = b.axes.transpose() * (p - b.center);
    (0..3).all(|i| local[i].abs() <= b.half[i])
}

/// Dense-sampling collision oracle: any lattice point of any gripper box
/// inside the object.
pub fn sampled_hit(boxes: &[Obb], obj: &Obb, h: f64) -> bool {
    boxes.iter().any(|b| lattice(b, h).iter().any(|p| inside(obj, p)))
}

pub fn resized(b: &Obb, delta: f64) -> Obb {
    Obb {
        half: b.half.map(|v| v + delta),
        ..*b
    }
}

/// Oracle verdict when it is stable under ±delta resizing of the object.
pub fn robust_verdict(boxes: &[Obb], obj: &Obb, h: f64, delta: f64) -> Option<bool> {
    let grown = sampled_hit(boxes, &resized(obj, delta), h);
    let shrunk = sampled_hit(boxes, &resized(obj, -delta), h);
    (grown == shrunk).then_some(grown)
}

pub fn base_pose(rotation: UnitQuaternion<f64>, t: Vector3<f64>) -> Pose {
    Pose::new(rotation, t, Frame::RobotBase)
}
