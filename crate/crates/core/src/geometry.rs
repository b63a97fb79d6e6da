//! Frame-tagged rigid poses, box extents and oriented-box intersection.
//!
//! Every [`Pose`] carries the frame its translation is expressed in. Helpers
//! that combine poses check the tag and refuse to mix frames.

use nalgebra::{Isometry3, Matrix3, Quaternion, Translation3, UnitQuaternion, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the norm of an incoming quaternion.
pub const QUATERNION_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("frame mismatch: expected {expected}, got {actual}")]
    FrameMismatch { expected: Frame, actual: Frame },
    #[error("quaternion norm {0} deviates from 1")]
    NonUnitQuaternion(f64),
    #[error("extents must be strictly positive, got {0:?}")]
    NonPositiveExtents([f64; 3]),
    #[error("rotation is not proper (det = {0})")]
    ImproperRotation(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Camera,
    RobotBase,
}

impl std::fmt::Display for Frame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Frame::Camera => "camera",
            Frame::RobotBase => "robot_base",
        })
    }
}

/// A 6-DoF pose: unit rotation plus translation in meters, tagged with a frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRepr", into = "PoseRepr")]
pub struct Pose {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
    pub frame: Frame,
}

/// Wire form: scalar-last quaternion.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
struct PoseRepr {
    quaternion: [f64; 4],
    translation: [f64; 3],
    frame: Frame,
}

impl TryFrom<PoseRepr> for Pose {
    type Error = GeometryError;

    fn try_from(r: PoseRepr) -> Result<Self, Self::Error> {
        Pose::from_xyzw(r.quaternion, r.translation, r.frame)
    }
}

impl From<Pose> for PoseRepr {
    fn from(p: Pose) -> Self {
        PoseRepr {
            quaternion: p.xyzw(),
            translation: [p.translation.x, p.translation.y, p.translation.z],
            frame: p.frame,
        }
    }
}

impl Pose {
    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>, frame: Frame) -> Self {
        Self {
            rotation,
            translation,
            frame,
        }
    }

    pub fn identity(frame: Frame) -> Self {
        Self::new(UnitQuaternion::identity(), Vector3::zeros(), frame)
    }

    /// Builds a pose from a scalar-last quaternion, rejecting non-unit input.
    pub fn from_xyzw(q: [f64; 4], t: [f64; 3], frame: Frame) -> Result<Self, GeometryError> {
        if q.iter().chain(t.iter()).any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite("pose"));
        }
        let raw = Quaternion::new(q[3], q[0], q[1], q[2]);
        let norm = raw.norm();
        if (norm - 1.0).abs() > QUATERNION_NORM_TOLERANCE {
            return Err(GeometryError::NonUnitQuaternion(norm));
        }
        Ok(Self::new(
            UnitQuaternion::from_quaternion(raw),
            Vector3::new(t[0], t[1], t[2]),
            frame,
        ))
    }

    /// Upright pose: rotation about +z only.
    pub fn upright(yaw: f64, translation: Vector3<f64>, frame: Frame) -> Self {
        Self::new(
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw),
            translation,
            frame,
        )
    }

    pub fn xyzw(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.i, q.j, q.k, q.w]
    }

    pub fn isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(Translation3::from(self.translation), self.rotation)
    }

    pub fn transform_point(&self, local: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * local + self.translation
    }

    /// Local +z axis expressed in the pose frame.
    pub fn up_axis(&self) -> Vector3<f64> {
        self.rotation * Vector3::z()
    }

    /// Angle between the local up axis and the frame's +z, in radians.
    pub fn tilt(&self) -> f64 {
        self.up_axis().z.clamp(-1.0, 1.0).acos()
    }

    /// Applies `transform` (mapping `from` coordinates to `to` coordinates).
    pub fn transformed(
        &self,
        transform: &Isometry3<f64>,
        from: Frame,
        to: Frame,
    ) -> Result<Pose, GeometryError> {
        self.expect_frame(from)?;
        let rotation = UnitQuaternion::new_normalize(*(transform.rotation * self.rotation).quaternion());
        let translation = transform.rotation * self.translation + transform.translation.vector;
        Ok(Pose::new(rotation, translation, to))
    }

    pub fn expect_frame(&self, frame: Frame) -> Result<(), GeometryError> {
        if self.frame == frame {
            Ok(())
        } else {
            Err(GeometryError::FrameMismatch {
                expected: frame,
                actual: self.frame,
            })
        }
    }
}

/// Box dimensions in meters along the local x (width), y (depth), z (height) axes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ExtentsRepr", into = "ExtentsRepr")]
pub struct Extents {
    width: f64,
    depth: f64,
    height: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
struct ExtentsRepr {
    w: f64,
    d: f64,
    h: f64,
}

impl TryFrom<ExtentsRepr> for Extents {
    type Error = GeometryError;
    fn try_from(r: ExtentsRepr) -> Result<Self, Self::Error> {
        Extents::new(r.w, r.d, r.h)
    }
}

impl From<Extents> for ExtentsRepr {
    fn from(e: Extents) -> Self {
        ExtentsRepr {
            w: e.width,
            d: e.depth,
            h: e.height,
        }
    }
}

impl Extents {
    pub fn new(width: f64, depth: f64, height: f64) -> Result<Self, GeometryError> {
        let all = [width, depth, height];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite("extents"));
        }
        if all.iter().any(|&v| v <= 0.0) {
            return Err(GeometryError::NonPositiveExtents(all));
        }
        Ok(Self {
            width,
            depth,
            height,
        })
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn depth(&self) -> f64 {
        self.depth
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn half(&self) -> Vector3<f64> {
        Vector3::new(self.width, self.depth, self.height) * 0.5
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.width, self.depth, self.height]
    }
}

/// Oriented bounding box in 3D.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Obb {
    pub center: Vector3<f64>,
    pub axes: Matrix3<f64>,
    pub half: Vector3<f64>,
}

impl Obb {
    pub fn new(center: Vector3<f64>, rotation: &UnitQuaternion<f64>, half: Vector3<f64>) -> Self {
        Self {
            center,
            axes: rotation.to_rotation_matrix().into_inner(),
            half,
        }
    }

    pub fn from_pose(pose: &Pose, extents: &Extents) -> Self {
        Self::new(pose.translation, &pose.rotation, extents.half())
    }

    pub fn axis(&self, i: usize) -> Vector3<f64> {
        self.axes.column(i).into_owned()
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        let d = p - self.center;
        (0..3).all(|i| d.dot(&self.axis(i)).abs() <= self.half[i])
    }

    pub fn corners(&self) -> [Vector3<f64>; 8] {
        let mut out = [Vector3::zeros(); 8];
        for (k, c) in out.iter_mut().enumerate() {
            let s = |bit: usize| if k & (1 << bit) == 0 { -1.0 } else { 1.0 };
            *c = self.center
                + self.axis(0) * (s(0) * self.half[0])
                + self.axis(1) * (s(1) * self.half[1])
                + self.axis(2) * (s(2) * self.half[2]);
        }
        out
    }

    /// Separating-axis test over the 15 candidate axes. Touching boxes intersect.
    pub fn intersects(&self, other: &Obb) -> bool {
        // Guards the cross-product axes when edges are (nearly) parallel.
        const EPS: f64 = 1e-12;
        let a = &self.half;
        let b = &other.half;
        let mut r = [[0.0; 3]; 3];
        let mut abs_r = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                r[i][j] = self.axis(i).dot(&other.axis(j));
                abs_r[i][j] = r[i][j].abs() + EPS;
            }
        }
        let d = other.center - self.center;
        let t = [
            d.dot(&self.axis(0)),
            d.dot(&self.axis(1)),
            d.dot(&self.axis(2)),
        ];

        for i in 0..3 {
            let rb = b[0] * abs_r[i][0] + b[1] * abs_r[i][1] + b[2] * abs_r[i][2];
            if t[i].abs() > a[i] + rb {
                return false;
            }
        }
        for j in 0..3 {
            let ra = a[0] * abs_r[0][j] + a[1] * abs_r[1][j] + a[2] * abs_r[2][j];
            let dist = t[0] * r[0][j] + t[1] * r[1][j] + t[2] * r[2][j];
            if dist.abs() > ra + b[j] {
                return false;
            }
        }
        for i in 0..3 {
            let (i1, i2) = ((i + 1) % 3, (i + 2) % 3);
            for j in 0..3 {
                let (j1, j2) = ((j + 1) % 3, (j + 2) % 3);
                let ra = a[i1] * abs_r[i2][j] + a[i2] * abs_r[i1][j];
                let rb = b[j1] * abs_r[i][j2] + b[j2] * abs_r[i][j1];
                let dist = t[i2] * r[i1][j] - t[i1] * r[i2][j];
                if dist.abs() > ra + rb {
                    return false;
                }
            }
        }
        true
    }
}

/// Oriented rectangle on the table plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect2 {
    pub center: Vector2<f64>,
    /// Unit direction of the first half-extent; the second is its left normal.
    pub axis: Vector2<f64>,
    pub half: Vector2<f64>,
}

impl Rect2 {
    pub fn new(center: Vector2<f64>, yaw: f64, half: Vector2<f64>) -> Self {
        Self {
            center,
            axis: Vector2::new(yaw.cos(), yaw.sin()),
            half,
        }
    }

    pub fn normal(&self) -> Vector2<f64> {
        Vector2::new(-self.axis.y, self.axis.x)
    }

    pub fn inflated(&self, margin: f64) -> Self {
        Self {
            half: self.half.add_scalar(margin),
            ..*self
        }
    }

    pub fn corners(&self) -> [Vector2<f64>; 4] {
        let u = self.axis * self.half.x;
        let v = self.normal() * self.half.y;
        [
            self.center - u - v,
            self.center + u - v,
            self.center + u + v,
            self.center - u + v,
        ]
    }

    pub fn contains(&self, p: &Vector2<f64>) -> bool {
        let d = p - self.center;
        d.dot(&self.axis).abs() <= self.half.x && d.dot(&self.normal()).abs() <= self.half.y
    }

    /// 2D separating-axis test over both rectangles' edge normals.
    pub fn intersects(&self, other: &Rect2) -> bool {
        let d = other.center - self.center;
        for axis in [self.axis, self.normal(), other.axis, other.normal()] {
            let ra = self.half.x * self.axis.dot(&axis).abs() + self.half.y * self.normal().dot(&axis).abs();
            let rb = other.half.x * other.axis.dot(&axis).abs()
                + other.half.y * other.normal().dot(&axis).abs();
            if d.dot(&axis).abs() > ra + rb {
                return false;
            }
        }
        true
    }
}

/// Heading of an upright rotation about +z, in radians.
pub fn yaw_of(rotation: &UnitQuaternion<f64>) -> f64 {
    let x = rotation * Vector3::x();
    x.y.atan2(x.x)
}

/// Footprint of an oriented box projected onto the horizontal plane.
///
/// Exact for upright boxes; tilted boxes use the projected horizontal axes.
pub fn footprint(pose: &Pose, extents: &Extents) -> Rect2 {
    let yaw = yaw_of(&pose.rotation);
    Rect2::new(
        pose.translation.xy(),
        yaw,
        Vector2::new(extents.width() * 0.5, extents.depth() * 0.5),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn aabb(center: [f64; 3], half: [f64; 3]) -> Obb {
        Obb::new(
            Vector3::from(center),
            &UnitQuaternion::identity(),
            Vector3::from(half),
        )
    }

    #[test]
    fn rejects_non_unit_quaternion() {
        let err = Pose::from_xyzw([0.0, 0.0, 0.0, 1.1], [0.0; 3], Frame::Camera).unwrap_err();
        assert!(matches!(err, GeometryError::NonUnitQuaternion(_)));
        assert!(Pose::from_xyzw([0.0, 0.0, 0.0, 1.0 + 5e-7], [0.0; 3], Frame::Camera).is_ok());
    }

    #[test]
    fn transform_checks_frame() {
        let p = Pose::identity(Frame::RobotBase);
        let err = p
            .transformed(&Isometry3::identity(), Frame::Camera, Frame::RobotBase)
            .unwrap_err();
        assert_eq!(
            err,
            GeometryError::FrameMismatch {
                expected: Frame::Camera,
                actual: Frame::RobotBase
            }
        );
    }

    #[test]
    fn extents_must_be_positive() {
        assert!(Extents::new(0.1, 0.1, 0.0).is_err());
        assert!(Extents::new(-0.1, 0.1, 0.1).is_err());
        assert!(Extents::new(0.1, 0.1, f64::NAN).is_err());
    }

    #[test]
    fn pose_json_is_scalar_last() {
        let p = Pose::upright(0.3, Vector3::new(0.1, 0.2, 0.3), Frame::RobotBase);
        let v = serde_json::to_value(p).unwrap();
        let q = v["quaternion"].as_array().unwrap();
        assert!((q[3].as_f64().unwrap() - (0.15f64).cos()).abs() < 1e-12);
        let back: Pose = serde_json::from_value(v).unwrap();
        assert!((back.translation - p.translation).norm() < 1e-15);
    }

    #[test]
    fn aabb_cases() {
        let a = aabb([0.0; 3], [0.5; 3]);
        assert!(a.intersects(&aabb([0.9, 0.0, 0.0], [0.5; 3])));
        assert!(a.intersects(&aabb([1.0, 0.0, 0.0], [0.5; 3])));
        assert!(!a.intersects(&aabb([1.01, 0.0, 0.0], [0.5; 3])));
        assert!(!a.intersects(&aabb([0.0, 0.0, 1.2], [0.5; 3])));
    }

    #[test]
    fn rotated_box_corner_gap() {
        // 45-degree cube reaches sqrt(2)/2 along x.
        let a = aabb([0.0; 3], [0.5; 3]);
        let rot = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), FRAC_PI_4);
        let reach = 0.5 + 0.5 * 2f64.sqrt();
        let near = Obb::new(Vector3::new(reach - 0.01, 0.0, 0.0), &rot, Vector3::repeat(0.5));
        let far = Obb::new(Vector3::new(reach + 0.01, 0.0, 0.0), &rot, Vector3::repeat(0.5));
        assert!(a.intersects(&near));
        assert!(!a.intersects(&far));
    }

    #[test]
    fn edge_edge_separation_needs_cross_axis() {
        // Two boxes tilted so only an edge-cross axis separates them.
        let a = Obb::new(
            Vector3::zeros(),
            &UnitQuaternion::from_axis_angle(&Vector3::y_axis(), FRAC_PI_4),
            Vector3::new(0.5, 2.0, 0.5),
        );
        let b = Obb::new(
            Vector3::new(0.0, 0.0, 1.3),
            &UnitQuaternion::from_axis_angle(&Vector3::x_axis(), FRAC_PI_4),
            Vector3::new(2.0, 0.5, 0.5),
        );
        // Ridges sit at z = sqrt(2)/2 (a, top) and z = c - sqrt(2)/2 (b, bottom).
        assert!(a.intersects(&b));
        let lifted = Obb {
            center: Vector3::new(0.0, 0.0, 2f64.sqrt() + 0.01),
            ..b
        };
        assert!(!a.intersects(&lifted));
    }

    #[test]
    fn rect_sat_basic() {
        let a = Rect2::new(Vector2::zeros(), 0.0, Vector2::new(0.05, 0.05));
        let b = Rect2::new(Vector2::new(0.11, 0.0), 0.0, Vector2::new(0.05, 0.05));
        assert!(!a.intersects(&b));
        assert!(a.inflated(0.01).intersects(&b));
        assert!(a.intersects(&a));
    }

    #[test]
    fn corners_lie_on_box() {
        let o = Obb::new(
            Vector3::new(1.0, 2.0, 3.0),
            &UnitQuaternion::from_euler_angles(0.1, 0.2, 0.3),
            Vector3::new(0.1, 0.2, 0.3),
        );
        for c in o.corners() {
            let local = o.axes.transpose() * (c - o.center);
            for i in 0..3 {
                assert!((local[i].abs() - o.half[i]).abs() < 1e-12);
            }
        }
    }
}
