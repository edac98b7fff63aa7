//! Geometric value types shared by every stage of the pipeline.
//!
//! Rotations use the intrinsic x–y'–z'' Euler convention wherever angles
//! appear: `R = Rx(roll) · Ry(pitch) · Rz(yaw)`. For small angles this
//! matches the linearized model `R ≈ I + [roll, pitch, yaw]×` used by the
//! registration solver, but poses are always rebuilt from the exact
//! composition so iterated updates stay orthonormal.

use nalgebra::{
    Isometry3, Matrix3, Matrix4, Quaternion, Rotation3, Translation3, UnitQuaternion, Vector3,
    Vector6,
};

use crate::error::{Error, Result};

/// A raw sensor return.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub position: Vector3<f32>,
    pub intensity: f32,
    /// Fraction of the sweep remaining after this point was captured:
    /// 0 at the end of the frame, 1 at its start.
    pub timestamp_ratio: Option<f32>,
}

impl Point {
    pub fn new(x: f32, y: f32, z: f32, intensity: f32) -> Self {
        Point {
            position: Vector3::new(x, y, z),
            intensity,
            timestamp_ratio: None,
        }
    }

    pub fn with_timestamp(mut self, ratio: f32) -> Self {
        self.timestamp_ratio = Some(ratio);
        self
    }

    /// Position widened to 64 bits.
    #[inline]
    pub fn xyz(&self) -> Vector3<f64> {
        self.position.cast::<f64>()
    }

    pub fn is_valid(&self) -> bool {
        self.position.iter().all(|c| c.is_finite()) && self.intensity >= 0.0
    }
}

/// One sweep of the sensor.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point>,
    pub frame_id: u64,
    pub sensor_origin: Vector3<f64>,
}

impl PointCloud {
    pub fn new(points: Vec<Point>, frame_id: u64) -> Self {
        PointCloud {
            points,
            frame_id,
            sensor_origin: Vector3::zeros(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// True when every point carries a timestamp ratio. Empty clouds have none.
    pub fn has_timestamps(&self) -> bool {
        !self.points.is_empty() && self.points.iter().all(|p| p.timestamp_ratio.is_some())
    }

    /// Checks the per-point invariants and that timestamps are all-or-nothing.
    pub fn validate(&self) -> Result<()> {
        if let Some(i) = self.points.iter().position(|p| !p.is_valid()) {
            return Err(Error::InvalidArgument(format!(
                "point {i} has non-finite coordinates or negative intensity"
            )));
        }
        let stamped = self
            .points
            .iter()
            .filter(|p| p.timestamp_ratio.is_some())
            .count();
        if stamped != 0 && stamped != self.points.len() {
            return Err(Error::InvalidArgument(format!(
                "{stamped} of {} points carry timestamps",
                self.points.len()
            )));
        }
        Ok(())
    }

    pub fn transformed(&self, pose: &Pose) -> PointCloud {
        let points = self
            .points
            .iter()
            .map(|p| Point {
                position: pose.apply(&p.xyz()).cast::<f32>(),
                ..*p
            })
            .collect();
        PointCloud {
            points,
            frame_id: self.frame_id,
            sensor_origin: pose.apply(&self.sensor_origin),
        }
    }
}

/// Six-parameter increment `(t_x, t_y, t_z, roll, pitch, yaw)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TangentVector {
    pub translation: Vector3<f64>,
    /// Roll, pitch, yaw in radians (x–y'–z'').
    pub angles: Vector3<f64>,
}

impl TangentVector {
    pub fn new(tx: f64, ty: f64, tz: f64, roll: f64, pitch: f64, yaw: f64) -> Self {
        TangentVector {
            translation: Vector3::new(tx, ty, tz),
            angles: Vector3::new(roll, pitch, yaw),
        }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        TangentVector::new(v[0], v[1], v[2], v[3], v[4], v[5])
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.translation.x,
            self.translation.y,
            self.translation.z,
            self.angles.x,
            self.angles.y,
            self.angles.z,
        )
    }

    /// Translation norm plus angle norm; meters and radians are summed directly.
    pub fn magnitude(&self) -> f64 {
        self.translation.norm() + self.angles.norm()
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite())
    }
}

/// Rigid transform on SE(3).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    iso: Isometry3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Pose::identity()
    }
}

const RENORMALIZE_TOLERANCE: f64 = 1e-9;

impl Pose {
    pub fn identity() -> Self {
        Pose {
            iso: Isometry3::identity(),
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Pose {
            iso: Isometry3::from_parts(Translation3::from(translation), rotation),
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Pose::new(UnitQuaternion::identity(), translation)
    }

    pub fn from_rotation(rotation: UnitQuaternion<f64>) -> Self {
        Pose::new(rotation, Vector3::zeros())
    }

    /// Rotation about `axis` by `angle` radians, no translation.
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let axis = nalgebra::Unit::new_normalize(*axis);
        Pose::from_rotation(UnitQuaternion::from_axis_angle(&axis, angle))
    }

    /// Builds a pose from a rotation matrix that may be slightly off SO(3).
    /// The matrix is projected onto the nearest rotation (polar decomposition).
    pub fn from_matrix_parts(rotation: &Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Pose::new(nearest_rotation(rotation), translation)
    }

    /// Row-major 3×4 `[R | t]`, the KITTI pose layout.
    pub fn from_row_major_3x4(v: &[f64; 12]) -> Self {
        let r = Matrix3::new(v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10]);
        Pose::from_matrix_parts(&r, Vector3::new(v[3], v[7], v[11]))
    }

    pub fn to_row_major_3x4(&self) -> [f64; 12] {
        let r = self.rotation_matrix();
        let t = self.translation();
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            t.x,
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            t.y,
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t.z,
        ]
    }

    pub fn isometry(&self) -> &Isometry3<f64> {
        &self.iso
    }

    pub fn rotation(&self) -> UnitQuaternion<f64> {
        self.iso.rotation
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.iso.rotation.to_rotation_matrix().into_inner()
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.iso.translation.vector
    }

    pub fn homogeneous(&self) -> Matrix4<f64> {
        self.iso.to_homogeneous()
    }

    /// Rotation angle in radians, in `[0, π]`.
    pub fn rotation_angle(&self) -> f64 {
        self.iso.rotation.angle()
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        let mut iso = self.iso * other.iso;
        let q = iso.rotation.quaternion();
        if (q.norm() - 1.0).abs() > RENORMALIZE_TOLERANCE {
            iso.rotation = UnitQuaternion::new_normalize(*q);
        }
        Pose { iso }
    }

    pub fn inverse(&self) -> Pose {
        Pose {
            iso: self.iso.inverse(),
        }
    }

    /// `self⁻¹ ∘ other`, the pose of `other` expressed in this frame.
    pub fn between(&self, other: &Pose) -> Pose {
        self.inverse().compose(other)
    }

    /// `R p + t`.
    #[inline]
    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.iso.rotation * p + self.iso.translation.vector
    }

    /// Rotates a direction without translating it.
    #[inline]
    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.iso.rotation * v
    }

    /// Partial motion: rotation slerped from identity by `s`, translation scaled by `s`.
    pub fn interpolate(&self, s: f64) -> Result<Pose> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::InvalidArgument(format!(
                "interpolation ratio {s} outside [0, 1]"
            )));
        }
        Ok(Pose::new(
            slerp_from_identity(&self.iso.rotation, s),
            self.translation() * s,
        ))
    }

    /// Exact pose for an increment: `R = Rx(roll) Ry(pitch) Rz(yaw)`.
    pub fn from_tangent(xi: &TangentVector) -> Pose {
        let rx = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), xi.angles.x);
        let ry = UnitQuaternion::from_axis_angle(&Vector3::y_axis(), xi.angles.y);
        let rz = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), xi.angles.z);
        Pose::new(rx * ry * rz, xi.translation)
    }

    /// Inverse of [`Pose::from_tangent`] for pitch within (−π/2, π/2).
    pub fn to_tangent(&self) -> TangentVector {
        let r = self.rotation_matrix();
        let pitch = r[(0, 2)].clamp(-1.0, 1.0).asin();
        let roll = (-r[(1, 2)]).atan2(r[(2, 2)]);
        let yaw = (-r[(0, 1)]).atan2(r[(0, 0)]);
        TangentVector {
            translation: self.translation(),
            angles: Vector3::new(roll, pitch, yaw),
        }
    }

    pub fn is_valid(&self) -> bool {
        let q = self.iso.rotation.quaternion();
        (q.norm() - 1.0).abs() < 1e-12
            && q.coords.iter().all(|c| c.is_finite())
            && self.translation().iter().all(|c| c.is_finite())
    }
}

impl std::ops::Mul for Pose {
    type Output = Pose;

    fn mul(self, rhs: Pose) -> Pose {
        self.compose(&rhs)
    }
}

impl std::ops::Mul<&Pose> for &Pose {
    type Output = Pose;

    fn mul(self, rhs: &Pose) -> Pose {
        self.compose(rhs)
    }
}

/// Shortest-arc slerp from identity toward `q`.
fn slerp_from_identity(q: &UnitQuaternion<f64>, s: f64) -> UnitQuaternion<f64> {
    let mut target = *q.quaternion();
    if target.w < 0.0 {
        target = -target;
    }
    let cos_theta = target.w.clamp(-1.0, 1.0);
    let theta = cos_theta.acos();
    if theta < 1e-12 {
        return UnitQuaternion::identity();
    }
    let sin_theta = theta.sin();
    let a = ((1.0 - s) * theta).sin() / sin_theta;
    let b = (s * theta).sin() / sin_theta;
    let blended = Quaternion::identity() * a + target * b;
    UnitQuaternion::new_normalize(blended)
}

/// Closest rotation to an arbitrary 3×3 matrix in the Frobenius sense.
pub fn nearest_rotation(m: &Matrix3<f64>) -> UnitQuaternion<f64> {
    let svd = m.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let r = u * d * v_t;
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r))
}

/// `[v]×`, so that `skew(a) * b = a × b`.
#[inline]
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn rz(deg: f64) -> Pose {
        Pose::from_axis_angle(&Vector3::z(), deg.to_radians())
    }

    fn homogeneous_rz(deg: f64, t: Vector3<f64>) -> Matrix4<f64> {
        let (s, c) = deg.to_radians().sin_cos();
        Matrix4::new(
            c, -s, 0.0, t.x, s, c, 0.0, t.y, 0.0, 0.0, 1.0, t.z, 0.0, 0.0, 0.0, 1.0,
        )
    }

    fn arb_pose() -> impl Strategy<Value = Pose> {
        (
            prop::array::uniform3(-1.0f64..1.0),
            -PI..PI,
            prop::array::uniform3(-50.0f64..50.0),
        )
            .prop_filter("axis", |(a, _, _)| Vector3::from(*a).norm() > 1e-3)
            .prop_map(|(axis, angle, t)| {
                Pose::from_axis_angle(&Vector3::from(axis), angle).compose(&Pose::from_translation(
                    Vector3::from(t),
                ))
            })
    }

    #[test]
    fn compose_identity_and_inverse() {
        let t = rz(33.0).compose(&Pose::from_translation(Vector3::new(1.0, -2.0, 0.5)));
        assert_eq!(Pose::identity().compose(&t), t);
        let id = t.compose(&t.inverse());
        assert!(id.translation().norm() < 1e-12);
        assert!(id.rotation_angle() < 1e-12);
    }

    #[test]
    fn compose_matches_homogeneous_product() {
        let t1 = Vector3::new(1.0, 0.0, 0.0);
        let t2 = Vector3::new(0.0, 2.0, 1.0);
        let a = Pose::new(rz(30.0).rotation(), t1);
        let b = Pose::new(rz(60.0).rotation(), t2);
        let expected = homogeneous_rz(30.0, t1) * homogeneous_rz(60.0, t2);
        assert_relative_eq!(a.compose(&b).homogeneous(), expected, epsilon = 1e-12);
        assert_relative_eq!(
            a.compose(&b).rotation_matrix(),
            rz(90.0).rotation_matrix(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn apply_examples() {
        let p = Vector3::new(1.0, 2.0, 3.0);
        assert_eq!(Pose::identity().apply(&p), p);
        let shift = Pose::from_translation(Vector3::new(0.0, 0.0, 1.0));
        assert_eq!(shift.apply(&p), Vector3::new(1.0, 2.0, 4.0));
        let m = homogeneous_rz(90.0, Vector3::zeros());
        let expected = (m * Vector3::x().push(1.0)).xyz();
        assert_relative_eq!(rz(90.0).apply(&Vector3::x()), expected, epsilon = 1e-12);
        assert_relative_eq!(rz(90.0).apply(&Vector3::x()), Vector3::y(), epsilon = 1e-12);
    }

    #[test]
    fn interpolate_endpoints_and_half_angle() {
        let t = rz(70.0).compose(&Pose::from_translation(Vector3::new(3.0, 1.0, 0.0)));
        let zero = t.interpolate(0.0).unwrap();
        assert!(zero.rotation_angle() < 1e-12 && zero.translation().norm() < 1e-12);
        let one = t.interpolate(1.0).unwrap();
        assert_relative_eq!(one.homogeneous(), t.homogeneous(), epsilon = 1e-12);

        // Oracle: scale the axis-angle representation.
        let half = rz(90.0).interpolate(0.5).unwrap();
        let (axis, angle) = rz(90.0).rotation().axis_angle().unwrap();
        let oracle = UnitQuaternion::from_axis_angle(&axis, angle * 0.5);
        assert_relative_eq!(
            half.rotation_matrix(),
            oracle.to_rotation_matrix().into_inner(),
            epsilon = 1e-12
        );
        assert_relative_eq!(
            half.rotation_matrix(),
            rz(45.0).rotation_matrix(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn interpolate_rejects_out_of_range() {
        assert!(rz(10.0).interpolate(-0.1).is_err());
        assert!(rz(10.0).interpolate(1.5).is_err());
    }

    #[test]
    fn from_tangent_examples() {
        let id = Pose::from_tangent(&TangentVector::zero());
        assert_eq!(id, Pose::identity());

        let yaw = Pose::from_tangent(&TangentVector::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.001));
        let oracle = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), 0.001);
        assert_relative_eq!(
            yaw.rotation_matrix(),
            oracle.to_rotation_matrix().into_inner(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn from_tangent_matches_linearized_rotation_to_second_order() {
        for &(a, b, c) in &[
            (1e-3, 0.0, 0.0),
            (1e-3, -7e-4, 5e-4),
            (-4e-4, 1e-3, -1e-3),
            (2e-4, 3e-4, 1e-3),
        ] {
            let exact = Pose::from_tangent(&TangentVector::new(0.0, 0.0, 0.0, a, b, c));
            let linear = Matrix3::identity() + skew(&Vector3::new(a, b, c));
            let mismatch = (exact.rotation_matrix() - linear).abs().max();
            let norm_sq = a * a + b * b + c * c;
            assert!(mismatch <= norm_sq, "{mismatch} vs {norm_sq}");
        }
    }

    #[test]
    fn polar_projection_repairs_noisy_rotation() {
        let r = rz(20.0).rotation_matrix() + Matrix3::new(1e-5, 0.0, 0.0, 0.0, -2e-5, 0.0, 3e-6, 0.0, 0.0);
        let pose = Pose::from_matrix_parts(&r, Vector3::zeros());
        let m = pose.rotation_matrix();
        assert_relative_eq!(m.transpose() * m, Matrix3::identity(), epsilon = 1e-12);
        assert_relative_eq!(m.determinant(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cloud_validation() {
        let mut cloud = PointCloud::new(vec![Point::new(0.0, 0.0, 0.0, 1.0)], 0);
        assert!(cloud.validate().is_ok());
        cloud.points.push(Point::new(1.0, 0.0, 0.0, 1.0).with_timestamp(0.5));
        assert!(cloud.validate().is_err());
        cloud.points[0].timestamp_ratio = Some(0.1);
        assert!(cloud.validate().is_ok() && cloud.has_timestamps());
        cloud.points[0].position.x = f32::NAN;
        assert!(cloud.validate().is_err());
    }

    proptest! {
        #[test]
        fn compose_is_associative(a in arb_pose(), b in arb_pose(), c in arb_pose()) {
            let left = a.compose(&b).compose(&c);
            let right = a.compose(&b.compose(&c));
            prop_assert!((left.homogeneous() - right.homogeneous()).abs().max() < 1e-10);
        }

        #[test]
        fn apply_respects_composition(a in arb_pose(), b in arb_pose(), p in prop::array::uniform3(-100.0f64..100.0)) {
            let p = Vector3::from(p);
            let lhs = a.compose(&b).apply(&p);
            let rhs = a.apply(&b.apply(&p));
            prop_assert!((lhs - rhs).norm() < 1e-10);
        }

        #[test]
        fn split_interpolation_reproduces_rotation(
            axis in prop::array::uniform3(-1.0f64..1.0),
            angle in 0.0f64..3.0,
            s in 0.0f64..1.0,
        ) {
            prop_assume!(Vector3::from(axis).norm() > 1e-3);
            let t = Pose::from_axis_angle(&Vector3::from(axis), angle);
            let first = t.interpolate(s).unwrap();
            let rest = t.interpolate(1.0 - s).unwrap();
            let joined = first.compose(&rest);
            prop_assert!((joined.homogeneous() - t.homogeneous()).abs().max() < 1e-9);
        }

        #[test]
        fn tangent_round_trip(v in prop::array::uniform6(-0.01f64..0.01), t in prop::array::uniform3(-5.0f64..5.0)) {
            let xi = TangentVector::new(t[0], t[1], t[2], v[0], v[1], v[2]);
            let back = Pose::from_tangent(&xi).to_tangent();
            prop_assert!((back.to_vector() - xi.to_vector()).abs().max() < 1e-8);
        }

        #[test]
        fn composed_rotations_stay_orthonormal(a in arb_pose(), b in arb_pose()) {
            let mut acc = Pose::identity();
            for _ in 0..50 {
                acc = acc.compose(&a).compose(&b);
            }
            let r = acc.rotation_matrix();
            prop_assert!((r.transpose() * r - Matrix3::identity()).abs().max() < 1e-9);
            prop_assert!((r.determinant() - 1.0).abs() < 1e-9);
        }
    }
}
