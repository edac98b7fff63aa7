//! Correspondence weighting: robust residual kernel, class balancing and
//! intensity consistency.

use crate::features::FeatureClass;

/// General robust kernel evaluated at ε = d/δ:
/// `1` for κ = 2, `2ε/(ε²+2)` for κ = 0, otherwise `ε (ε²/|κ−2| + 1)^(κ/2−1)`.
///
/// This is the influence form of the kernel: it vanishes at ε = 0 for
/// κ ≠ 2. [`irls_weight`] is the matching reweighting factor.
pub fn weight_residual(d: f64, delta: f64, kappa: f64) -> f64 {
    let e = d / delta;
    if kappa == 2.0 {
        1.0
    } else if kappa == 0.0 {
        2.0 * e / (e * e + 2.0)
    } else {
        e * (e * e / (kappa - 2.0).abs() + 1.0).powf(kappa / 2.0 - 1.0)
    }
}

/// Iteratively-reweighted least-squares weight of the same kernel
/// (influence divided by ε); 1 at ε = 0 for every κ.
pub fn irls_weight(d: f64, delta: f64, kappa: f64) -> f64 {
    let e = d / delta;
    if kappa == 2.0 {
        1.0
    } else if kappa == 0.0 {
        2.0 / (e * e + 2.0)
    } else {
        (e * e / (kappa - 2.0).abs() + 1.0).powf(kappa / 2.0 - 1.0)
    }
}

/// Up- or down-weights ground and roof against the other planar and
/// linear evidence so that all six degrees of freedom stay observable.
/// `counts` is indexed by [`FeatureClass::index`].
pub fn weight_balanced(class: FeatureClass, counts: &[usize; 6], min: f64, max: f64) -> f64 {
    match class {
        FeatureClass::Ground | FeatureClass::Roof => {
            let c = |k: FeatureClass| counts[k.index()] as f64;
            let horizontal = c(FeatureClass::Ground) + c(FeatureClass::Roof);
            if horizontal == 0.0 {
                return 1.0;
            }
            let raw = (c(FeatureClass::Facade) + 2.0 * c(FeatureClass::Pillar) - c(FeatureClass::Beam))
                / (2.0 * horizontal);
            raw.clamp(min, max)
        }
        _ => 1.0,
    }
}

pub fn weight_intensity(intensity_diff: f64, intensity_max: f64) -> f64 {
    (-intensity_diff.abs() / intensity_max).exp()
}
