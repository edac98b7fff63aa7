//! Odometry loop: feature extraction, scan-to-scan and scan-to-map
//! registration, dynamic-object filtering and local-map maintenance.

use std::time::Instant;

use nalgebra::Vector3;

use crate::config::RunConfig;
use crate::error::Result;
use crate::features::{extract_features, FeatureClass, FeatureCloud, FeatureFrame};
use crate::io::{StageTimings, Trajectory, TrajectoryRecord};
use crate::motion::{compensate, Interpolation};
use crate::registration::{mulls_icp, IcpParams, IndexedFeatures, RegistrationResult};
use crate::types::{PointCloud, Pose};

/// Static features of recent frames, in world coordinates, with
/// per-class indices kept in sync with the points.
#[derive(Clone, Debug, Default)]
pub struct LocalMap {
    target: IndexedFeatures,
    /// Pose of the last frame merged into the map.
    pub reference_pose: Pose,
}

impl LocalMap {
    pub fn new(cloud: FeatureCloud, reference_pose: Pose) -> Self {
        LocalMap {
            target: IndexedFeatures::new(cloud),
            reference_pose,
        }
    }

    pub fn cloud(&self) -> &FeatureCloud {
        self.target.cloud()
    }

    pub fn target(&self) -> &IndexedFeatures {
        &self.target
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }
}

/// Drops nonground points within `r_near` of `scanner` whose nearest
/// same-class map point is farther than `d_dyn`. `features` are in world
/// coordinates.
pub fn filter_dynamic(
    features: &FeatureCloud,
    map: &LocalMap,
    scanner: &Vector3<f64>,
    r_near: f64,
    d_dyn: f64,
) -> FeatureCloud {
    let mut out = features.clone();
    out.retain(|class, p| {
        if class == FeatureClass::Ground || (p.position - scanner).norm() > r_near {
            return true;
        }
        map.target()
            .index(class)
            .nearest_within(&p.position, d_dyn)
            .is_some()
    });
    out
}

/// Appends world-frame `features`, crops to `crop_radius` around `pose`
/// and keeps at most `max_per_class` points per class, evicting the
/// oldest frames first.
pub fn update_map(map: &LocalMap, features: &FeatureCloud, pose: &Pose, crop_radius: f64, max_per_class: usize) -> LocalMap {
    let center = pose.translation();
    let mut cloud = map.cloud().clone();
    cloud.extend(features);
    cloud.retain(|_, p| (p.position - center).norm() <= crop_radius);
    for class in FeatureClass::ALL {
        let set = cloud.get_mut(class);
        if set.len() > max_per_class {
            // Stable sort keeps insertion order within a frame.
            set.sort_by_key(|p| std::cmp::Reverse(p.frame_id));
            set.truncate(max_per_class);
            set.sort_by_key(|p| p.frame_id);
        }
    }
    LocalMap::new(cloud, *pose)
}

/// Result of one odometry step.
#[derive(Clone, Debug)]
pub struct FrameOutput {
    pub frame_id: u64,
    /// Sensor-to-world pose.
    pub pose: Pose,
    /// Motion relative to the previous frame.
    pub relative: Pose,
    /// False when registration failed and the pose was extrapolated.
    pub tracked: bool,
    pub features: FeatureFrame,
    pub registration: Option<RegistrationResult>,
    pub timings: StageTimings,
}

/// Mutable odometry state, owned by the frame loop.
#[derive(Clone, Debug)]
pub struct OdometryState {
    cfg: RunConfig,
    pose: Pose,
    prev_motion: Pose,
    map: LocalMap,
    prev_frame: Option<FeatureFrame>,
    trajectory: Trajectory,
    untracked: Vec<u64>,
}

impl OdometryState {
    pub fn new(cfg: RunConfig) -> Self {
        OdometryState {
            cfg,
            pose: Pose::identity(),
            prev_motion: Pose::identity(),
            map: LocalMap::default(),
            prev_frame: None,
            trajectory: Trajectory::new(),
            untracked: Vec::new(),
        }
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn pose(&self) -> &Pose {
        &self.pose
    }

    pub fn map(&self) -> &LocalMap {
        &self.map
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    pub fn into_trajectory(self) -> Trajectory {
        self.trajectory
    }

    /// Frame ids whose registration failed.
    pub fn untracked(&self) -> &[u64] {
        &self.untracked
    }

    pub fn process_frame(&mut self, cloud: &PointCloud) -> Result<FrameOutput> {
        let t_start = Instant::now();
        let fc = &self.cfg.frontend;
        let mut timings = StageTimings::default();

        let t = Instant::now();
        let compensated;
        let input = if fc.motion_compensation && cloud.has_timestamps() && self.prev_frame.is_some() {
            let mode = if fc.exact_compensation {
                Interpolation::Exact
            } else {
                Interpolation::Bucketed
            };
            compensated = compensate(cloud, &self.prev_motion.inverse(), mode)?;
            &compensated
        } else {
            cloud
        };
        let frame = extract_features(input, &self.cfg, &Pose::identity())?;
        timings.feature_ms = t.elapsed().as_secs_f64() * 1e3;

        let Some(prev_frame) = self.prev_frame.take() else {
            // Bootstrap: the first frame defines the world frame.
            let t = Instant::now();
            self.map = update_map(&LocalMap::default(), &frame.sparse, &Pose::identity(), fc.crop_radius, fc.max_points_per_class);
            timings.map_ms = t.elapsed().as_secs_f64() * 1e3;
            timings.total_ms = t_start.elapsed().as_secs_f64() * 1e3;
            self.pose = Pose::identity();
            self.prev_frame = Some(frame.clone());
            self.trajectory.push(TrajectoryRecord {
                frame_id: frame.frame_id,
                pose: self.pose,
                timings,
            })?;
            return Ok(FrameOutput {
                frame_id: frame.frame_id,
                pose: self.pose,
                relative: Pose::identity(),
                tracked: true,
                features: frame,
                registration: None,
                timings,
            });
        };

        let t = Instant::now();
        let outcome = self.register(&frame, &prev_frame, &mut timings);
        timings.registration_ms = t.elapsed().as_secs_f64() * 1e3;

        let prev_pose = self.pose;
        let (pose, registration, tracked) = match outcome {
            Ok(r) => (r.transform, Some(r), true),
            Err(e) => {
                log::warn!("frame {}: registration failed ({e}); extrapolating", frame.frame_id);
                self.untracked.push(frame.frame_id);
                (prev_pose.compose(&self.prev_motion), None, false)
            }
        };
        let relative = prev_pose.between(&pose);

        let t = Instant::now();
        if tracked {
            let world = frame.sparse.transformed(&pose);
            let kept = if fc.dynamic_filter && !self.map.is_empty() {
                filter_dynamic(&world, &self.map, &pose.translation(), fc.dynamic_range, fc.dynamic_dist)
            } else {
                world
            };
            self.map = update_map(&self.map, &kept, &pose, fc.crop_radius, fc.max_points_per_class);
        }
        timings.map_ms = t.elapsed().as_secs_f64() * 1e3;

        self.pose = pose;
        self.prev_motion = relative;
        self.prev_frame = Some(frame.clone());
        timings.total_ms = t_start.elapsed().as_secs_f64() * 1e3;
        self.trajectory.push(TrajectoryRecord {
            frame_id: frame.frame_id,
            pose,
            timings,
        })?;
        Ok(FrameOutput {
            frame_id: frame.frame_id,
            pose,
            relative,
            tracked,
            features: frame,
            registration,
            timings,
        })
    }

    /// Scan-to-scan against the previous dense frame, then scan-to-map
    /// from that estimate. Returns the world pose.
    fn register(&self, frame: &FeatureFrame, prev: &FeatureFrame, timings: &mut StageTimings) -> Result<RegistrationResult> {
        let fc = &self.cfg.frontend;
        let base = IcpParams::from_config(&self.cfg);
        let mut relative = self.prev_motion;
        if fc.scan_to_scan_iterations > 0 {
            let target = IndexedFeatures::new(prev.dense.clone());
            let params = base.clone().with_max_iterations(fc.scan_to_scan_iterations);
            let r = mulls_icp(&frame.sparse, &target, &relative, &params)?;
            timings.association_ms += r.association_ms;
            timings.estimation_ms += r.estimation_ms;
            timings.iterations += r.iterations;
            relative = r.transform;
        }
        let guess = self.pose.compose(&relative);
        let params = base.with_max_iterations(fc.scan_to_map_iterations);
        let r = mulls_icp(&frame.sparse, self.map.target(), &guess, &params)?;
        timings.association_ms += r.association_ms;
        timings.estimation_ms += r.estimation_ms;
        timings.iterations += r.iterations;
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeaturePoint;

    fn fp(x: f64, y: f64, z: f64, frame_id: u64) -> FeaturePoint {
        FeaturePoint {
            position: Vector3::new(x, y, z),
            direction: Vector3::x(),
            intensity: 0.0,
            height: 1.0,
            score: 1.0,
            frame_id,
        }
    }

    fn wall(frame_id: u64, x: f64) -> FeatureCloud {
        let mut c = FeatureCloud::default();
        for k in 0..50 {
            c.get_mut(FeatureClass::Facade).push(fp(x, k as f64 * 0.2, 1.0, frame_id));
        }
        c
    }

    #[test]
    fn crop_and_union() {
        let map = update_map(&LocalMap::default(), &wall(0, 5.0), &Pose::identity(), 1e9, 100_000);
        let map = update_map(&map, &wall(1, 100.0), &Pose::identity(), 1e9, 100_000);
        assert_eq!(map.len(), 100);
        let cropped = update_map(&map, &FeatureCloud::default(), &Pose::identity(), 80.0, 100_000);
        assert_eq!(cropped.len(), 50);
        assert!(cropped.cloud().iter().all(|(_, p)| p.position.norm() <= 80.0));
    }

    #[test]
    fn budget_evicts_oldest() {
        let mut map = LocalMap::default();
        for f in 0..12u64 {
            let mut c = FeatureCloud::default();
            for k in 0..1000 {
                c.get_mut(FeatureClass::Facade).push(fp(k as f64 * 0.01, f as f64, 0.0, f));
            }
            map = update_map(&map, &c, &Pose::identity(), 1e9, 10_000);
        }
        let set = map.cloud().get(FeatureClass::Facade);
        assert_eq!(set.len(), 10_000);
        assert!(set.iter().all(|p| p.frame_id >= 2));
    }

    #[test]
    fn dynamic_filter_gates() {
        let map = LocalMap::new(wall(0, 5.0), Pose::identity());
        let aligned = wall(1, 5.0);
        assert_eq!(filter_dynamic(&aligned, &map, &Vector3::zeros(), 30.0, 0.5), aligned);

        let mut moved = wall(1, 5.0);
        let mut box_near = FeatureCloud::default();
        for k in 0..10 {
            box_near.get_mut(FeatureClass::Facade).push(fp(7.0, k as f64 * 0.2, 1.0, 1));
        }
        moved.extend(&box_near);
        let kept = filter_dynamic(&moved, &map, &Vector3::zeros(), 30.0, 0.5);
        assert_eq!(kept.len(), 50);

        // Same displaced object beyond the range gate survives.
        let far_map = LocalMap::new(wall(0, 50.0), Pose::identity());
        let mut far = wall(1, 50.0);
        for k in 0..10 {
            far.get_mut(FeatureClass::Facade).push(fp(52.0, k as f64 * 0.2, 1.0, 1));
        }
        assert_eq!(filter_dynamic(&far, &far_map, &Vector3::zeros(), 30.0, 0.5).len(), 60);

        // Ground is never filtered.
        let mut ground = FeatureCloud::default();
        ground.get_mut(FeatureClass::Ground).push(fp(1.0, 1.0, -1.8, 1));
        assert_eq!(filter_dynamic(&ground, &map, &Vector3::zeros(), 30.0, 0.5).len(), 1);
    }
}
