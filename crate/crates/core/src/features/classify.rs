use nalgebra::Vector3;

use super::pca::PcaResult;
use super::FeatureClass;
use crate::config::FeatureConfig;

/// Class decision thresholds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassRules {
    pub linearity_min: f64,
    pub planarity_min: f64,
    pub curvature_min: f64,
    pub roof_height_min: f64,
    /// cos of the direction tolerance: |d·up| above this is "vertical".
    pub cos_tol: f64,
    /// sin of the direction tolerance: |d·up| below this is "horizontal".
    pub sin_tol: f64,
}

impl ClassRules {
    pub fn from_config(cfg: &FeatureConfig) -> Self {
        let a = cfg.direction_angle_deg.to_radians();
        ClassRules {
            linearity_min: cfg.linearity_min,
            planarity_min: cfg.planarity_min,
            curvature_min: cfg.curvature_min,
            roof_height_min: cfg.roof_height_min,
            cos_tol: a.cos(),
            sin_tol: a.sin(),
        }
    }

    /// Nonground class for one point, linear before planar before vertex.
    pub fn classify(&self, pca: &PcaResult, height: f64, up: &Vector3<f64>) -> Option<FeatureClass> {
        if pca.linearity > self.linearity_min {
            let c = pca.primary.dot(up).abs();
            if c > self.cos_tol {
                return Some(FeatureClass::Pillar);
            }
            if c < self.sin_tol {
                return Some(FeatureClass::Beam);
            }
        }
        if pca.planarity > self.planarity_min {
            let c = pca.normal.dot(up).abs();
            if c < self.sin_tol {
                return Some(FeatureClass::Facade);
            }
            if c > self.cos_tol && height > self.roof_height_min {
                return Some(FeatureClass::Roof);
            }
        }
        if pca.curvature > self.curvature_min {
            return Some(FeatureClass::Vertex);
        }
        None
    }
}

impl Default for ClassRules {
    fn default() -> Self {
        Self::from_config(&FeatureConfig::default())
    }
}

/// Flips `n` to face `viewpoint` from `at`.
pub fn orient_normal(n: Vector3<f64>, at: &Vector3<f64>, viewpoint: &Vector3<f64>) -> Vector3<f64> {
    if n.dot(&(viewpoint - at)) < 0.0 {
        -n
    } else {
        n
    }
}

/// Canonical sign for a line direction: z ≥ 0, then x ≥ 0, then y ≥ 0.
pub fn orient_primary(v: Vector3<f64>) -> Vector3<f64> {
    const EPS: f64 = 1e-9;
    let flip = if v.z.abs() > EPS {
        v.z < 0.0
    } else if v.x.abs() > EPS {
        v.x < 0.0
    } else {
        v.y < 0.0
    };
    if flip {
        -v
    } else {
        v
    }
}
