//! Classified feature extraction: ground, facade, roof, pillar, beam and
//! vertex points with normals or line directions, thinned to a dense map
//! level and a sparse registration level.

pub mod classify;
pub mod downsample;
pub mod ground;
pub mod ncc;
pub mod pca;

use std::path::Path;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use classify::ClassRules;
pub use ground::{ground_filter, refine_ground, GroundSplit};
pub use ncc::{encode_ncc, NccDescriptor};
pub use pca::{pca_neighborhood, pca_of, PcaResult};

use crate::config::RunConfig;
use crate::error::Result;
use crate::io::{write_ply, PlyFormat};
use crate::spatial::SpatialIndex;
use crate::types::{Point, PointCloud, Pose};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureClass {
    Ground = 0,
    Facade = 1,
    Roof = 2,
    Pillar = 3,
    Beam = 4,
    Vertex = 5,
}

/// How a class contributes residuals during registration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    PointToPoint,
    PointToLine,
    PointToPlane,
}

impl FeatureClass {
    pub const ALL: [FeatureClass; 6] = [
        FeatureClass::Ground,
        FeatureClass::Facade,
        FeatureClass::Roof,
        FeatureClass::Pillar,
        FeatureClass::Beam,
        FeatureClass::Vertex,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn metric(self) -> Metric {
        match self {
            FeatureClass::Ground | FeatureClass::Facade | FeatureClass::Roof => Metric::PointToPlane,
            FeatureClass::Pillar | FeatureClass::Beam => Metric::PointToLine,
            FeatureClass::Vertex => Metric::PointToPoint,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureClass::Ground => "ground",
            FeatureClass::Facade => "facade",
            FeatureClass::Roof => "roof",
            FeatureClass::Pillar => "pillar",
            FeatureClass::Beam => "beam",
            FeatureClass::Vertex => "vertex",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeaturePoint {
    pub position: Vector3<f64>,
    /// Unit normal for planar classes, unit line direction for linear
    /// classes, zero for vertices.
    pub direction: Vector3<f64>,
    pub intensity: f32,
    /// Height above the local ground (m).
    pub height: f64,
    /// Class saliency used for suppression.
    pub score: f64,
    /// Frame the point was observed in.
    pub frame_id: u64,
}

impl FeaturePoint {
    pub fn transformed(&self, pose: &Pose) -> FeaturePoint {
        FeaturePoint {
            position: pose.apply(&self.position),
            direction: pose.rotate(&self.direction),
            ..*self
        }
    }
}

/// Six disjoint per-class point sets.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureCloud {
    sets: [Vec<FeaturePoint>; 6],
}

impl FeatureCloud {
    pub fn get(&self, class: FeatureClass) -> &[FeaturePoint] {
        &self.sets[class.index()]
    }

    pub fn get_mut(&mut self, class: FeatureClass) -> &mut Vec<FeaturePoint> {
        &mut self.sets[class.index()]
    }

    pub fn len(&self) -> usize {
        self.sets.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.iter().all(Vec::is_empty)
    }

    pub fn counts(&self) -> [usize; 6] {
        std::array::from_fn(|i| self.sets[i].len())
    }

    pub fn iter(&self) -> impl Iterator<Item = (FeatureClass, &FeaturePoint)> {
        FeatureClass::ALL
            .into_iter()
            .flat_map(move |c| self.get(c).iter().map(move |p| (c, p)))
    }

    pub fn transformed(&self, pose: &Pose) -> FeatureCloud {
        FeatureCloud {
            sets: std::array::from_fn(|i| self.sets[i].iter().map(|p| p.transformed(pose)).collect()),
        }
    }

    pub fn extend(&mut self, other: &FeatureCloud) {
        for c in FeatureClass::ALL {
            self.get_mut(c).extend_from_slice(other.get(c));
        }
    }

    pub fn retain(&mut self, mut keep: impl FnMut(FeatureClass, &FeaturePoint) -> bool) {
        for c in FeatureClass::ALL {
            self.get_mut(c).retain(|p| keep(c, p));
        }
    }

    /// Flattens into a point cloud with class labels, for PLY export.
    pub fn to_labeled_cloud(&self, frame_id: u64) -> (PointCloud, Vec<u8>) {
        let mut points = Vec::with_capacity(self.len());
        let mut labels = Vec::with_capacity(self.len());
        for (c, p) in self.iter() {
            let q = p.position.cast::<f32>();
            points.push(Point::new(q.x, q.y, q.z, p.intensity));
            labels.push(c as u8);
        }
        (PointCloud::new(points, frame_id), labels)
    }

    /// Writes the points with a `class` property (0 ground, 1 facade,
    /// 2 roof, 3 pillar, 4 beam, 5 vertex).
    pub fn write_labeled_ply(&self, path: impl AsRef<Path>, format: PlyFormat) -> Result<()> {
        let (cloud, labels) = self.to_labeled_cloud(0);
        write_ply(&cloud, Some(&labels), path, format)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExtractionStats {
    pub input: usize,
    pub rough_ground: usize,
    pub nonground: usize,
    pub sampled_nonground: usize,
    pub unclassified: usize,
    /// Every point fell into one ground-grid cell.
    pub single_cell: bool,
}

/// Features of one frame in its sensor frame.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureFrame {
    pub frame_id: u64,
    pub sensor_origin: Vector3<f64>,
    /// Map-level density.
    pub dense: FeatureCloud,
    /// Registration-source density; a subset of `dense`.
    pub sparse: FeatureCloud,
    /// One descriptor per dense vertex, same order.
    pub ncc: Vec<NccDescriptor>,
    pub stats: ExtractionStats,
}

/// Runs ground filtering, PCA classification, suppression, thinning and
/// vertex description over one cloud.
///
/// `reference_plane` maps ground-plane coordinates into the cloud frame;
/// the identity is a horizontal plane through the sensor.
pub fn extract_features(cloud: &PointCloud, cfg: &RunConfig, reference_plane: &Pose) -> Result<FeatureFrame> {
    let fc = &cfg.features;
    let gc = &cfg.ground;
    let valid: Vec<&Point> = cloud.points.iter().filter(|p| p.is_valid()).collect();
    let positions: Vec<Vector3<f64>> = valid.iter().map(|p| p.xyz()).collect();
    let intensity = |i: usize| valid[i].intensity;
    let up = reference_plane.rotate(&Vector3::z());
    let origin = cloud.sensor_origin;

    let split = ground_filter(&positions, gc.grid_size, gc.delta_h1, gc.delta_h2, reference_plane)?;
    if split.single_cell {
        log::warn!(
            "frame {}: all points in one {} m ground cell",
            cloud.frame_id,
            gc.grid_size
        );
    }
    let seed = fc.seed ^ cloud.frame_id.wrapping_mul(0x2545_F491_4F6C_DD1D);

    let mut raw = FeatureCloud::default();
    for g in refine_ground(&positions, &split.cells, gc.ransac_iters, gc.inlier_dist, &up, seed) {
        raw.get_mut(FeatureClass::Ground).push(FeaturePoint {
            position: positions[g.index],
            direction: g.normal,
            intensity: intensity(g.index),
            height: split.height_above_ground[g.index],
            score: 1.0,
            frame_id: cloud.frame_id,
        });
    }

    let mut nonground = split.nonground.clone();
    if nonground.len() > fc.max_nonground {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked: Vec<usize> =
            rand::seq::index::sample(&mut rng, nonground.len(), fc.max_nonground)
                .into_iter()
                .map(|k| nonground[k])
                .collect();
        picked.sort_unstable();
        nonground = picked;
    }
    let ng_pos: Vec<Vector3<f64>> = nonground.iter().map(|&i| positions[i]).collect();
    let index = SpatialIndex::build(&ng_pos);
    let pcas = pca_neighborhood(&ng_pos, &index, fc.knn_k, fc.knn_radius, fc.min_neighbors);
    let rules = ClassRules::from_config(fc);
    let labeled: Vec<Option<(FeatureClass, FeaturePoint)>> = pcas
        .par_iter()
        .enumerate()
        .map(|(k, pca)| {
            let pca = pca.as_ref()?;
            let i = nonground[k];
            let height = split.height_above_ground[i];
            let class = rules.classify(pca, height, &up)?;
            let (direction, score) = match class.metric() {
                Metric::PointToPlane => (
                    classify::orient_normal(pca.normal, &positions[i], &origin),
                    pca.planarity,
                ),
                Metric::PointToLine => (classify::orient_primary(pca.primary), pca.linearity),
                Metric::PointToPoint => (Vector3::zeros(), pca.curvature),
            };
            Some((
                class,
                FeaturePoint {
                    position: positions[i],
                    direction,
                    intensity: intensity(i),
                    height,
                    score,
                    frame_id: cloud.frame_id,
                },
            ))
        })
        .collect();
    let mut unclassified = 0;
    for item in labeled {
        match item {
            Some((c, p)) => raw.get_mut(c).push(p),
            None => unclassified += 1,
        }
    }

    let (dense, sparse) = thin(&raw, cfg);
    let ncc = encode_ncc(&dense, fc.ncc_radius, fc.intensity_max, fc.height_max);
    Ok(FeatureFrame {
        frame_id: cloud.frame_id,
        sensor_origin: origin,
        dense,
        sparse,
        ncc,
        stats: ExtractionStats {
            input: cloud.len(),
            rough_ground: split.rough_ground.len(),
            nonground: split.nonground.len(),
            sampled_nonground: nonground.len(),
            unclassified,
            single_cell: split.single_cell,
        },
    })
}

/// NMS per class, then dense and sparse voxel levels.
pub fn thin(raw: &FeatureCloud, cfg: &RunConfig) -> (FeatureCloud, FeatureCloud) {
    let fc = &cfg.features;
    let mut dense = FeatureCloud::default();
    let mut sparse = FeatureCloud::default();
    for c in FeatureClass::ALL {
        let pts = raw.get(c);
        let pos: Vec<_> = pts.iter().map(|p| p.position).collect();
        let score: Vec<_> = pts.iter().map(|p| p.score).collect();
        let (nms_radius, dense_voxel, sparse_voxel) = match c {
            FeatureClass::Ground => (0.0, fc.ground_dense_voxel, fc.ground_sparse_voxel),
            FeatureClass::Facade | FeatureClass::Roof => (fc.nms_radius_planar, fc.dense_voxel, fc.sparse_voxel),
            FeatureClass::Pillar | FeatureClass::Beam => (fc.nms_radius_linear, fc.dense_voxel, fc.sparse_voxel),
            FeatureClass::Vertex => (fc.nms_radius_vertex, fc.dense_voxel, fc.sparse_voxel),
        };
        let survivors = downsample::nms(&pos, &score, nms_radius);
        let s_pos: Vec<_> = survivors.iter().map(|&i| pos[i]).collect();
        let s_score: Vec<_> = survivors.iter().map(|&i| score[i]).collect();
        let d_idx: Vec<usize> = downsample::voxel_select(&s_pos, &s_score, dense_voxel)
            .into_iter()
            .map(|k| survivors[k])
            .collect();
        let d_pos: Vec<_> = d_idx.iter().map(|&i| pos[i]).collect();
        let d_score: Vec<_> = d_idx.iter().map(|&i| score[i]).collect();
        let sp_idx: Vec<usize> = downsample::voxel_select(&d_pos, &d_score, sparse_voxel)
            .into_iter()
            .map(|k| d_idx[k])
            .collect();
        *dense.get_mut(c) = d_idx.iter().map(|&i| pts[i]).collect();
        *sparse.get_mut(c) = sp_idx.iter().map(|&i| pts[i]).collect();
    }
    (dense, sparse)
}
