//! Intra-sweep motion compensation under a uniform-motion model.
//!
//! A point captured with timestamp ratio `s` (1 at sweep start, 0 at sweep
//! end) is moved into the end-of-sweep frame by
//! `slerp(R, s) · p + s · t`, where `(R, t)` is the sensor motion across
//! the whole sweep expressed in the end frame.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::types::{Point, PointCloud, Pose};

/// Number of timestamp levels in bucketed mode.
pub const TIMESTAMP_BUCKETS: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interpolation {
    /// One interpolated transform per point.
    Exact,
    /// Ratios quantized to [`TIMESTAMP_BUCKETS`] levels, one transform per level.
    Bucketed,
}

/// Undistorts `cloud`, returning points referenced to the end of the sweep
/// with their timestamps cleared.
pub fn compensate(cloud: &PointCloud, motion: &Pose, mode: Interpolation) -> Result<PointCloud> {
    if !cloud.has_timestamps() {
        if cloud.is_empty() {
            return Ok(cloud.clone());
        }
        return Err(Error::MissingTimestamps);
    }
    if let Some(bad) = cloud
        .points
        .iter()
        .filter_map(|p| p.timestamp_ratio)
        .find(|s| !(0.0..=1.0).contains(s))
    {
        return Err(Error::InvalidArgument(format!(
            "timestamp ratio {bad} outside [0, 1]"
        )));
    }
    if motion.rotation_angle() >= std::f64::consts::PI - 1e-9 {
        return Err(Error::InvalidArgument(
            "sweep rotation must be below π for a unique slerp".into(),
        ));
    }

    let points: Vec<Point> = match mode {
        Interpolation::Exact => cloud
            .points
            .par_iter()
            .map(|p| {
                let s = p.timestamp_ratio.unwrap_or(0.0) as f64;
                // s is already range-checked.
                let partial = motion.interpolate(s).unwrap_or_default();
                moved(p, &partial)
            })
            .collect(),
        Interpolation::Bucketed => {
            let levels = (TIMESTAMP_BUCKETS - 1) as f64;
            let table: Vec<Pose> = (0..TIMESTAMP_BUCKETS)
                .map(|b| motion.interpolate(b as f64 / levels).unwrap_or_default())
                .collect();
            cloud
                .points
                .par_iter()
                .map(|p| {
                    let s = p.timestamp_ratio.unwrap_or(0.0) as f64;
                    moved(p, &table[(s * levels).round() as usize])
                })
                .collect()
        }
    };
    Ok(PointCloud {
        points,
        frame_id: cloud.frame_id,
        sensor_origin: cloud.sensor_origin,
    })
}

fn moved(p: &Point, pose: &Pose) -> Point {
    Point {
        position: pose.apply(&p.xyz()).cast(),
        intensity: p.intensity,
        timestamp_ratio: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{UnitQuaternion, Vector3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn stamped_cloud(n: usize, seed: u64, ratio: Option<f32>) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = (0..n)
            .map(|_| {
                let s = ratio.unwrap_or_else(|| rng.random_range(0.0..=1.0));
                Point::new(
                    rng.random_range(-20.0..20.0),
                    rng.random_range(-20.0..20.0),
                    rng.random_range(-2.0..4.0),
                    rng.random_range(0.0..100.0),
                )
                .with_timestamp(s)
            })
            .collect();
        PointCloud::new(points, 3)
    }

    fn motion() -> Pose {
        Pose::from_axis_angle(&Vector3::new(0.1, 0.0, 1.0), 0.05)
            .compose(&Pose::from_translation(Vector3::new(1.0, 0.1, 0.0)))
    }

    #[test]
    fn zero_ratio_is_identity() {
        let cloud = stamped_cloud(200, 1, Some(0.0));
        let out = compensate(&cloud, &motion(), Interpolation::Exact).unwrap();
        for (a, b) in cloud.points.iter().zip(&out.points) {
            assert!((a.xyz() - b.xyz()).norm() < 1e-6);
            assert!(b.timestamp_ratio.is_none());
        }
    }

    #[test]
    fn full_ratio_applies_translation() {
        let cloud = stamped_cloud(100, 2, Some(1.0));
        let shift = Pose::from_translation(Vector3::new(0.0, 0.0, 1.0));
        for mode in [Interpolation::Exact, Interpolation::Bucketed] {
            let out = compensate(&cloud, &shift, mode).unwrap();
            for (a, b) in cloud.points.iter().zip(&out.points) {
                assert!((b.xyz() - a.xyz() - Vector3::z()).norm() < 1e-5);
            }
        }
    }

    #[test]
    fn half_ratio_rotates_by_half_angle() {
        let points = vec![
            Point::new(1.0, 0.0, 0.0, 1.0).with_timestamp(0.5),
            Point::new(0.0, 2.0, 1.0, 1.0).with_timestamp(0.5),
            Point::new(-3.0, 0.5, 0.0, 1.0).with_timestamp(0.5),
        ];
        let cloud = PointCloud::new(points, 0);
        let rot = Pose::from_axis_angle(&Vector3::z(), 10f64.to_radians());
        let out = compensate(&cloud, &rot, Interpolation::Exact).unwrap();
        // Oracle: half-angle quaternion about the same axis.
        let half = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), 5f64.to_radians());
        for (a, b) in cloud.points.iter().zip(&out.points) {
            let expected = (half * a.xyz()).cast::<f32>().cast::<f64>();
            assert!((b.xyz() - expected).norm() < 1e-9);
        }
    }

    #[test]
    fn preserves_count_intensity_and_rigid_groups() {
        let cloud = stamped_cloud(500, 3, None);
        let out = compensate(&cloud, &motion(), Interpolation::Exact).unwrap();
        assert_eq!(out.len(), cloud.len());
        assert!(cloud
            .points
            .iter()
            .zip(&out.points)
            .all(|(a, b)| a.intensity == b.intensity));

        let group = stamped_cloud(50, 4, Some(0.37));
        let moved = compensate(&group, &motion(), Interpolation::Exact).unwrap();
        for i in 0..group.len() {
            for j in (i + 1)..group.len() {
                let before = (group.points[i].xyz() - group.points[j].xyz()).norm();
                let after = (moved.points[i].xyz() - moved.points[j].xyz()).norm();
                assert!((before - after).abs() < 2e-5);
            }
        }
    }

    #[test]
    fn identity_motion_is_identity() {
        let cloud = stamped_cloud(300, 5, None);
        for mode in [Interpolation::Exact, Interpolation::Bucketed] {
            let out = compensate(&cloud, &Pose::identity(), mode).unwrap();
            for (a, b) in cloud.points.iter().zip(&out.points) {
                assert_eq!(a.position, b.position);
            }
        }
    }

    #[test]
    fn bucketed_error_is_small() {
        let cloud = stamped_cloud(2000, 6, None);
        let m = motion();
        let exact = compensate(&cloud, &m, Interpolation::Exact).unwrap();
        let fast = compensate(&cloud, &m, Interpolation::Bucketed).unwrap();
        let bound = cloud
            .points
            .iter()
            .map(|p| p.xyz().norm())
            .fold(0.0, f64::max)
            * (m.rotation_angle() + m.translation().norm())
            / (TIMESTAMP_BUCKETS - 1) as f64;
        for (a, b) in exact.points.iter().zip(&fast.points) {
            assert!((a.xyz() - b.xyz()).norm() <= bound);
        }
    }

    #[test]
    fn missing_timestamps_rejected() {
        let cloud = PointCloud::new(vec![Point::new(1.0, 2.0, 3.0, 0.0)], 0);
        assert!(matches!(
            compensate(&cloud, &motion(), Interpolation::Exact),
            Err(Error::MissingTimestamps)
        ));
    }
}
