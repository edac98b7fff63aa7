//! Submap snapshots of the local map and the triggers that spawn them.

use nalgebra::{Matrix6, Vector3};

use crate::config::{BackendConfig, RunConfig};
use crate::features::{downsample, encode_ncc, ExtractionStats, FeatureClass, FeatureCloud, FeatureFrame};
use crate::frontend::{FrameOutput, LocalMap};
use crate::types::Pose;

/// A frame belonging to a submap.
#[derive(Clone, Debug, PartialEq)]
pub struct Member {
    pub frame_id: u64,
    /// Pose in the submap reference frame.
    pub relative: Pose,
    /// Scan-to-map information (world-frame left perturbation), if the
    /// frame was tracked.
    pub information: Option<Matrix6<f64>>,
}

/// Snapshot of the local map, expressed in the frame of the submap's
/// last member, which is its reference.
#[derive(Clone, Debug)]
pub struct Submap {
    pub id: usize,
    /// Odometry pose of the reference frame (world).
    pub reference_pose: Pose,
    /// `dense` holds the whole map, `sparse` a thinned copy used as the
    /// registration source and `ncc` one descriptor per dense vertex.
    pub features: FeatureFrame,
    pub members: Vec<Member>,
    pub accumulated_translation: f64,
    pub accumulated_rotation: f64,
    pub accumulated_frames: usize,
}

impl Submap {
    pub fn snapshot(
        id: usize,
        reference_frame: u64,
        reference_pose: Pose,
        map_world: &FeatureCloud,
        members: Vec<Member>,
        accumulated: (f64, f64, usize),
        cfg: &RunConfig,
    ) -> Submap {
        let fc = &cfg.features;
        let dense = map_world.transformed(&reference_pose.inverse());
        let mut sparse = FeatureCloud::default();
        for c in FeatureClass::ALL {
            let pts = dense.get(c);
            let pos: Vec<_> = pts.iter().map(|p| p.position).collect();
            let score: Vec<_> = pts.iter().map(|p| p.score).collect();
            let voxel = if c == FeatureClass::Ground { fc.ground_sparse_voxel } else { fc.sparse_voxel };
            *sparse.get_mut(c) = downsample::voxel_select(&pos, &score, voxel)
                .into_iter()
                .map(|i| pts[i])
                .collect();
        }
        let ncc = encode_ncc(&dense, fc.ncc_radius, fc.intensity_max, fc.height_max);
        Submap {
            id,
            reference_pose,
            features: FeatureFrame {
                frame_id: reference_frame,
                sensor_origin: Vector3::zeros(),
                dense,
                sparse,
                ncc,
                stats: ExtractionStats::default(),
            },
            members,
            accumulated_translation: accumulated.0,
            accumulated_rotation: accumulated.1,
            accumulated_frames: accumulated.2,
        }
    }

    /// Dense vertex positions, in descriptor order.
    pub fn vertex_positions(&self) -> Vec<Vector3<f64>> {
        self.features.dense.get(FeatureClass::Vertex).iter().map(|p| p.position).collect()
    }

    pub fn relative_members(&self) -> Vec<(u64, Pose)> {
        self.members.iter().map(|m| (m.frame_id, m.relative)).collect()
    }
}

/// Motion accumulated since the last submap.
#[derive(Clone, Debug, PartialEq)]
pub struct SubmapTrigger {
    pub max_translation: f64,
    /// Radians.
    pub max_rotation: f64,
    pub max_frames: usize,
    pub translation: f64,
    pub rotation: f64,
    pub frames: usize,
}

impl SubmapTrigger {
    pub fn from_config(cfg: &BackendConfig) -> Self {
        SubmapTrigger {
            max_translation: cfg.submap_max_translation,
            max_rotation: cfg.submap_max_rotation_deg.to_radians(),
            max_frames: cfg.submap_max_frames,
            translation: 0.0,
            rotation: 0.0,
            frames: 0,
        }
    }

    /// Adds one frame's motion; true once any budget is reached.
    pub fn push(&mut self, relative: &Pose) -> bool {
        self.translation += relative.translation().norm();
        self.rotation += relative.rotation_angle();
        self.frames += 1;
        self.translation >= self.max_translation || self.rotation >= self.max_rotation || self.frames >= self.max_frames
    }

    pub fn accumulated(&self) -> (f64, f64, usize) {
        (self.translation, self.rotation, self.frames)
    }

    pub fn reset(&mut self) {
        self.translation = 0.0;
        self.rotation = 0.0;
        self.frames = 0;
    }
}

/// Front-end side of the back-end: collects member frames and cuts
/// submaps. The first frame always becomes submap 0, the graph's anchor.
#[derive(Clone, Debug)]
pub struct SubmapBuilder {
    cfg: RunConfig,
    trigger: SubmapTrigger,
    pending: Vec<(u64, Pose, Option<Matrix6<f64>>)>,
    next_id: usize,
}

impl SubmapBuilder {
    pub fn new(cfg: RunConfig) -> Self {
        SubmapBuilder {
            trigger: SubmapTrigger::from_config(&cfg.backend),
            cfg,
            pending: Vec::new(),
            next_id: 0,
        }
    }

    pub fn trigger(&self) -> &SubmapTrigger {
        &self.trigger
    }

    /// Records the frame and snapshots `map` as a submap when a trigger
    /// fires. `map` must be the local map after this frame was merged.
    pub fn maybe_spawn_submap(&mut self, out: &FrameOutput, map: &LocalMap) -> Option<Submap> {
        let info = out.registration.as_ref().map(|r| r.information);
        self.pending.push((out.frame_id, out.pose, info));
        let fire = self.trigger.push(&out.relative);
        (self.next_id == 0 || fire).then(|| self.cut(map))
    }

    /// Emits the remaining frames as a final submap, if any.
    pub fn flush(&mut self, map: &LocalMap) -> Option<Submap> {
        (!self.pending.is_empty()).then(|| self.cut(map))
    }

    fn cut(&mut self, map: &LocalMap) -> Submap {
        let (ref_id, ref_pose, _) = *self.pending.last().expect("cut with no pending frames");
        let inv = ref_pose.inverse();
        let members = self
            .pending
            .drain(..)
            .map(|(frame_id, pose, information)| Member {
                frame_id,
                relative: inv.compose(&pose),
                information,
            })
            .collect();
        let s = Submap::snapshot(self.next_id, ref_id, ref_pose, map.cloud(), members, self.trigger.accumulated(), &self.cfg);
        self.trigger.reset();
        self.next_id += 1;
        s
    }
}
