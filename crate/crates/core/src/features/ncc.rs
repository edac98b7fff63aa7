use nalgebra::Vector6;

use super::{FeatureClass, FeatureCloud};
use crate::spatial::SpatialIndex;

/// Neighborhood category context of a vertex keypoint:
/// `[facade, pillar, beam, roof, Ī / I_max, h / h_max]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NccDescriptor(pub Vector6<f64>);

impl NccDescriptor {
    pub fn cosine(&self, other: &NccDescriptor) -> f64 {
        let d = self.0.norm() * other.0.norm();
        if d == 0.0 {
            0.0
        } else {
            self.0.dot(&other.0) / d
        }
    }
}

/// Describes every vertex of `cloud` by the classes, mean intensity and
/// height found among the feature points within `radius` (the vertex
/// itself excluded). Ground points count toward |N| and intensity but have
/// no ratio slot.
pub fn encode_ncc(cloud: &FeatureCloud, radius: f64, intensity_max: f64, height_max: f64) -> Vec<NccDescriptor> {
    let all: Vec<(FeatureClass, usize)> = FeatureClass::ALL
        .iter()
        .flat_map(|&c| (0..cloud.get(c).len()).map(move |i| (c, i)))
        .collect();
    let index = SpatialIndex::build(all.iter().map(|&(c, i)| &cloud.get(c)[i].position));
    let vertices = cloud.get(FeatureClass::Vertex);
    vertices
        .iter()
        .enumerate()
        .map(|(vi, v)| {
            let mut counts = [0usize; 4];
            let mut intensity = 0.0;
            let mut n = 0usize;
            for j in index.within(&v.position, radius) {
                let (class, i) = all[j];
                if class == FeatureClass::Vertex && i == vi {
                    continue;
                }
                n += 1;
                intensity += cloud.get(class)[i].intensity as f64;
                match class {
                    FeatureClass::Facade => counts[0] += 1,
                    FeatureClass::Pillar => counts[1] += 1,
                    FeatureClass::Beam => counts[2] += 1,
                    FeatureClass::Roof => counts[3] += 1,
                    _ => {}
                }
            }
            let mean_intensity = if n == 0 { v.intensity as f64 } else { intensity / n as f64 };
            let ratio = |k: usize| if n == 0 { 0.0 } else { counts[k] as f64 / n as f64 };
            NccDescriptor(Vector6::new(
                ratio(0),
                ratio(1),
                ratio(2),
                ratio(3),
                (mean_intensity / intensity_max).clamp(0.0, 1.0),
                (v.height / height_max).clamp(0.0, 1.0),
            ))
        })
        .collect()
}
