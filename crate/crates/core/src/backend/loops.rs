//! Loop candidates, descriptor matching, coarse RANSAC alignment and
//! ICP verification between submaps.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::features::NccDescriptor;
use crate::registration::{mulls_icp, IcpParams, IndexedFeatures, RegistrationResult};
use crate::types::Pose;

use super::graph::{EdgeKind, PoseGraphEdge};
use super::submap::Submap;

/// Earlier submaps within `radius` of submap `current`, excluding its
/// immediate predecessor.
pub fn find_loop_candidates(references: &[Pose], current: usize, radius: f64) -> Vec<usize> {
    let here = references[current].translation();
    (0..current.saturating_sub(1))
        .filter(|&i| (references[i].translation() - here).norm() < radius)
        .collect()
}

/// Mutual-best pairs `(i in a, j in b, similarity)` with similarity at
/// least `cos_min`. Ties go to the lower index.
pub fn match_descriptors(a: &[NccDescriptor], b: &[NccDescriptor], cos_min: f64) -> Vec<(usize, usize, f64)> {
    fn best(from: &[NccDescriptor], to: &[NccDescriptor]) -> Vec<Option<(usize, f64)>> {
        from.par_iter()
            .map(|d| {
                to.iter()
                    .enumerate()
                    .map(|(j, e)| (j, d.cosine(e)))
                    .fold(None, |acc: Option<(usize, f64)>, (j, s)| match acc {
                        Some((_, bs)) if bs >= s => acc,
                        _ => Some((j, s)),
                    })
            })
            .collect()
    }
    let ab = best(a, b);
    let ba = best(b, a);
    ab.iter()
        .enumerate()
        .filter_map(|(i, m)| {
            let (j, s) = (*m)?;
            (s >= cos_min && matches!(ba[j], Some((k, _)) if k == i)).then_some((i, j, s))
        })
        .collect()
}

/// Descriptor correspondences between two submaps; fewer than three is a
/// rejection.
pub fn match_ncc(a: &Submap, b: &Submap, cos_min: f64) -> Result<Vec<(usize, usize, f64)>> {
    if a.features.ncc.len() < 3 || b.features.ncc.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "submaps {} and {} need at least 3 descriptors each",
            a.id, b.id
        )));
    }
    let m = match_descriptors(&a.features.ncc, &b.features.ncc, cos_min);
    if m.len() < 3 {
        return Err(Error::InsufficientData(format!("{} descriptor matches", m.len())));
    }
    Ok(m)
}

/// Least-squares rigid transform with `dst ≈ T src` (closed form via the
/// SVD of the cross-covariance). None for fewer than three pairs or a
/// collinear configuration.
pub fn rigid_fit(src: &[Vector3<f64>], dst: &[Vector3<f64>]) -> Option<Pose> {
    if src.len() < 3 || src.len() != dst.len() {
        return None;
    }
    let n = src.len() as f64;
    let cs = src.iter().sum::<Vector3<f64>>() / n;
    let cd = dst.iter().sum::<Vector3<f64>>() / n;
    let h: Matrix3<f64> = src.iter().zip(dst).map(|(s, d)| (s - cs) * (d - cd).transpose()).sum();
    let svd = h.svd(true, true);
    let mut sv = svd.singular_values;
    sv.as_mut_slice().sort_by(|a, b| b.total_cmp(a));
    if sv[1] <= 1e-12 * sv[0].max(1e-300) {
        return None;
    }
    let (u, vt) = (svd.u?, svd.v_t?);
    let v = vt.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let r = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u.transpose();
    let t = cd - r * cs;
    Some(Pose::from_matrix_parts(&r, t))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RansacParams {
    pub iterations: usize,
    pub inlier_dist: f64,
    pub min_inliers: usize,
    pub seed: u64,
}

impl RansacParams {
    pub fn from_config(cfg: &RunConfig) -> Self {
        let b = &cfg.backend;
        RansacParams {
            iterations: b.ransac_iterations,
            inlier_dist: b.ransac_inlier_dist,
            min_inliers: b.ransac_min_inliers,
            seed: b.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoarseResult {
    /// Maps source points onto target points.
    pub transform: Pose,
    pub inliers: Vec<usize>,
}

fn inliers_of(t: &Pose, src: &[Vector3<f64>], dst: &[Vector3<f64>], tol: f64) -> Vec<usize> {
    (0..src.len()).filter(|&i| (t.apply(&src[i]) - dst[i]).norm() <= tol).collect()
}

/// RANSAC over three-point rigid hypotheses on paired points
/// `src[i] ↔ dst[i]`, then a refit on the best inlier set.
pub fn coarse_register(src: &[Vector3<f64>], dst: &[Vector3<f64>], params: &RansacParams) -> Result<CoarseResult> {
    if src.len() != dst.len() {
        return Err(Error::InvalidArgument("correspondence lists differ in length".into()));
    }
    let n = src.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!("{n} correspondences")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<CoarseResult> = None;
    for _ in 0..params.iterations {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        let k = rng.random_range(0..n);
        if i == j || j == k || i == k {
            continue;
        }
        let (s, d) = ([src[i], src[j], src[k]], [dst[i], dst[j], dst[k]]);
        if (s[1] - s[0]).cross(&(s[2] - s[0])).norm() < 1e-6 || (d[1] - d[0]).cross(&(d[2] - d[0])).norm() < 1e-6 {
            continue;
        }
        // Rigid motions preserve distances; skip hopeless samples early.
        let tol = 2.0 * params.inlier_dist;
        if [(0, 1), (1, 2), (0, 2)]
            .iter()
            .any(|&(a, b)| ((s[a] - s[b]).norm() - (d[a] - d[b]).norm()).abs() > tol)
        {
            continue;
        }
        let Some(t) = rigid_fit(&s, &d) else { continue };
        let inl = inliers_of(&t, src, dst, params.inlier_dist);
        if best.as_ref().is_none_or(|b| inl.len() > b.inliers.len()) {
            best = Some(CoarseResult { transform: t, inliers: inl });
        }
    }
    let mut best = best.ok_or_else(|| Error::RegistrationFailed("no valid RANSAC hypothesis".into()))?;
    let s: Vec<_> = best.inliers.iter().map(|&i| src[i]).collect();
    let d: Vec<_> = best.inliers.iter().map(|&i| dst[i]).collect();
    if let Some(t) = rigid_fit(&s, &d) {
        let inl = inliers_of(&t, src, dst, params.inlier_dist);
        if inl.len() >= best.inliers.len() {
            best = CoarseResult { transform: t, inliers: inl };
        }
    }
    if best.inliers.len() < params.min_inliers {
        return Err(Error::RegistrationFailed(format!(
            "{} RANSAC inliers (need {})",
            best.inliers.len(),
            params.min_inliers
        )));
    }
    Ok(best)
}

#[derive(Clone, Debug)]
pub struct VerifyParams {
    pub sigma_max: f64,
    pub overlap_min: f64,
    pub icp: IcpParams,
}

impl VerifyParams {
    pub fn from_config(cfg: &RunConfig) -> Self {
        VerifyParams {
            sigma_max: cfg.backend.sigma_max,
            overlap_min: cfg.backend.overlap_min,
            icp: IcpParams::from_config(cfg).with_max_iterations(cfg.frontend.scan_to_map_iterations),
        }
    }
}

/// Map-to-map ICP of `source` against `target` from `guess` (pose of the
/// source reference in the target reference frame). Accepted when both
/// σ̂ and overlap pass; the edge runs `target.id → source.id`.
pub fn verify_and_refine(
    target: &Submap,
    source: &Submap,
    guess: &Pose,
    params: &VerifyParams,
    kind: EdgeKind,
) -> Result<(PoseGraphEdge, RegistrationResult)> {
    let indexed = IndexedFeatures::new(target.features.dense.clone());
    let r = mulls_icp(&source.features.sparse, &indexed, guess, &params.icp)?;
    if r.sigma > params.sigma_max || r.overlap < params.overlap_min {
        return Err(Error::RegistrationFailed(format!(
            "submaps {} -> {}: sigma {:.3} m, overlap {:.2}",
            target.id, source.id, r.sigma, r.overlap
        )));
    }
    let edge = PoseGraphEdge::new(target.id, source.id, r.transform, r.information, kind)?;
    Ok((edge, r))
}
