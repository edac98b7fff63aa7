use nalgebra::Vector3;
use rayon::prelude::*;

use super::solve::Correspondence;
use crate::features::{FeatureClass, FeatureCloud, FeaturePoint, Metric};
use crate::spatial::SpatialIndex;

/// Registration target: a feature cloud with one spatial index per class
/// and one over all nonground points.
#[derive(Clone, Debug, Default)]
pub struct IndexedFeatures {
    cloud: FeatureCloud,
    indices: [SpatialIndex; 6],
    nonground: SpatialIndex,
    nonground_points: Vec<Vector3<f64>>,
}

impl IndexedFeatures {
    pub fn new(cloud: FeatureCloud) -> Self {
        let indices = std::array::from_fn(|i| {
            SpatialIndex::build(cloud.get(FeatureClass::ALL[i]).iter().map(|p| &p.position))
        });
        let nonground_points: Vec<Vector3<f64>> = cloud
            .iter()
            .filter(|(c, _)| *c != FeatureClass::Ground)
            .map(|(_, p)| p.position)
            .collect();
        IndexedFeatures {
            nonground: SpatialIndex::build(&nonground_points),
            cloud,
            indices,
            nonground_points,
        }
    }

    pub fn cloud(&self) -> &FeatureCloud {
        &self.cloud
    }

    pub fn index(&self, class: FeatureClass) -> &SpatialIndex {
        &self.indices[class.index()]
    }

    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }

    /// Distance to the closest nonground point of any class.
    pub fn nearest_nonground(&self, q: &Vector3<f64>, radius: f64) -> Option<(Vector3<f64>, f64)> {
        self.nonground
            .nearest_within(q, radius)
            .map(|(i, d)| (self.nonground_points[i], d))
    }
}

fn metric_distance(metric: Metric, p: &Vector3<f64>, q: &Vector3<f64>, dir: &Vector3<f64>) -> f64 {
    let d = q - p;
    match metric {
        Metric::PointToPoint => d.norm(),
        Metric::PointToPlane => dir.dot(&d).abs(),
        Metric::PointToLine => dir.cross(&d).norm(),
    }
}

/// Matches every source point to its nearest same-class target within
/// `max_dist`, rejecting planar and linear pairs whose directions differ
/// by more than `acos(direction_cos_min)`. Weights are left at 1.
///
/// `source` must already be expressed in the target frame.
pub fn associate(
    source: &FeatureCloud,
    target: &IndexedFeatures,
    max_dist: f64,
    direction_cos_min: f64,
) -> Vec<Correspondence> {
    let mut out = Vec::new();
    for class in FeatureClass::ALL {
        let index = target.index(class);
        if index.is_empty() {
            continue;
        }
        let targets = target.cloud.get(class);
        let metric = class.metric();
        let matched: Vec<Correspondence> = source
            .get(class)
            .par_iter()
            .filter_map(|s: &FeaturePoint| {
                let (j, _) = index.nearest_within(&s.position, max_dist)?;
                let t = &targets[j];
                let direction = match metric {
                    Metric::PointToPoint => None,
                    _ => {
                        if s.direction.dot(&t.direction).abs() < direction_cos_min {
                            return None;
                        }
                        Some(t.direction)
                    }
                };
                let distance =
                    metric_distance(metric, &s.position, &t.position, &direction.unwrap_or_default());
                Some(Correspondence {
                    source: s.position,
                    target: t.position,
                    metric,
                    direction,
                    class,
                    intensity_diff: (s.intensity - t.intensity).abs() as f64,
                    distance,
                    weight: 1.0,
                })
            })
            .collect();
        out.extend(matched);
    }
    out
}

/// Fraction of nonground source points (already in the target frame) with
/// a nonground target point within `tau`.
pub fn overlap_ratio(source: &FeatureCloud, target: &IndexedFeatures, tau: f64) -> f64 {
    let points: Vec<&FeaturePoint> = source
        .iter()
        .filter(|(c, _)| *c != FeatureClass::Ground)
        .map(|(_, p)| p)
        .collect();
    if points.is_empty() {
        return 0.0;
    }
    let hits = points
        .par_iter()
        .filter(|p| target.nearest_nonground(&p.position, tau).is_some())
        .count();
    hits as f64 / points.len() as f64
}
