use std::path::Path;
use std::time::Instant;

use nalgebra::Matrix6;

use super::association::{associate, overlap_ratio, IndexedFeatures};
use super::solve::{evaluate_quality, solve_step, Correspondence, NormalEquations};
use super::weights::{irls_weight, weight_balanced, weight_intensity, weight_residual};
use crate::config::{RegistrationConfig, ResidualWeighting, RunConfig};
use crate::error::{Error, Result};
use crate::features::{FeatureClass, FeatureCloud};
use crate::types::{Pose, TangentVector};

#[derive(Clone, Debug, PartialEq)]
pub struct IcpParams {
    pub reg: RegistrationConfig,
    pub max_iterations: usize,
    pub intensity_max: f64,
    /// Keep a per-iteration trace in the result.
    pub trace: bool,
}

impl IcpParams {
    pub fn from_config(cfg: &RunConfig) -> Self {
        IcpParams {
            reg: cfg.registration.clone(),
            max_iterations: cfg.registration.max_iterations,
            intensity_max: cfg.features.intensity_max,
            trace: false,
        }
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }
}

impl Default for IcpParams {
    fn default() -> Self {
        Self::from_config(&RunConfig::default())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub xi_norm: f64,
    /// Weighted squared residual per observation row before the update.
    pub residual: f64,
    pub threshold: f64,
    pub class_counts: [usize; 6],
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegistrationResult {
    /// Source-to-target transform.
    pub transform: Pose,
    pub increments: Vec<TangentVector>,
    pub sigma: f64,
    pub information: Matrix6<f64>,
    pub overlap: f64,
    pub iterations: usize,
    pub converged: bool,
    pub correspondences: usize,
    pub association_ms: f64,
    pub estimation_ms: f64,
    pub trace: Vec<TraceRow>,
}

impl RegistrationResult {
    pub fn write_trace_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let err = |e: csv::Error| Error::io(path, e.into());
        let mut w = csv::Writer::from_path(path).map_err(err)?;
        let mut header = vec!["iteration", "xi_norm", "residual", "threshold"];
        let names: Vec<String> = FeatureClass::ALL.iter().map(|c| format!("n_{}", c.name())).collect();
        header.extend(names.iter().map(String::as_str));
        w.write_record(&header).map_err(err)?;
        for r in &self.trace {
            let mut row = vec![
                r.iteration.to_string(),
                format!("{:e}", r.xi_norm),
                format!("{:e}", r.residual),
                format!("{}", r.threshold),
            ];
            row.extend(r.class_counts.iter().map(|c| c.to_string()));
            w.write_record(&row).map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Sets `weight` on every correspondence from the residual kernel, the
/// class balance of the set and intensity consistency.
pub fn apply_weights(corrs: &mut [Correspondence], params: &IcpParams) -> [usize; 6] {
    let reg = &params.reg;
    let mut counts = [0usize; 6];
    for c in corrs.iter() {
        counts[c.class.index()] += 1;
    }
    for c in corrs.iter_mut() {
        let mut w = match reg.residual_weighting {
            ResidualWeighting::Irls => irls_weight(c.distance, reg.delta, reg.kappa),
            ResidualWeighting::Influence => weight_residual(c.distance, reg.delta, reg.kappa),
        };
        if reg.balanced_weighting {
            w *= weight_balanced(c.class, &counts, reg.balanced_min, reg.balanced_max);
        }
        if reg.intensity_weighting {
            w *= weight_intensity(c.intensity_diff, params.intensity_max);
        }
        c.weight = w;
    }
    counts
}

/// Multi-metric ICP of `source` (in its own frame) against `target`,
/// starting from `guess`. The association radius shrinks geometrically
/// each iteration; iteration stops once an increment's
/// `‖t‖ + ‖angles‖` drops below the convergence threshold.
pub fn mulls_icp(
    source: &FeatureCloud,
    target: &IndexedFeatures,
    guess: &Pose,
    params: &IcpParams,
) -> Result<RegistrationResult> {
    let reg = &params.reg;
    let cos_min = reg.direction_angle_deg.to_radians().cos();
    let mut transform = *guess;
    let mut threshold = reg.dist_initial;
    let mut increments = Vec::new();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut last: Option<(NormalEquations, TangentVector)> = None;
    let mut association_ms = 0.0;
    let mut estimation_ms = 0.0;
    let mut prev_residual = f64::INFINITY;
    let mut prev_step = f64::INFINITY;
    let mut growth = 0;
    let mut correspondences = 0;

    for iteration in 0..params.max_iterations {
        let t0 = Instant::now();
        let moved = source.transformed(&transform);
        let mut corrs = associate(&moved, target, threshold, cos_min);
        association_ms += t0.elapsed().as_secs_f64() * 1e3;

        let t1 = Instant::now();
        let class_counts = apply_weights(&mut corrs, params);
        let neq = NormalEquations::accumulate(&corrs);
        if neq.rows < 6 {
            estimation_ms += t1.elapsed().as_secs_f64() * 1e3;
            if iteration == 0 {
                return Err(Error::UnderDetermined { rows: neq.rows });
            }
            break;
        }
        let xi = solve_step(&neq, reg.max_condition)?;
        transform = Pose::from_tangent(&xi).compose(&transform);
        estimation_ms += t1.elapsed().as_secs_f64() * 1e3;

        let residual = neq.btb / neq.rows as f64;
        if params.trace {
            trace.push(TraceRow {
                iteration,
                xi_norm: xi.magnitude(),
                residual,
                threshold,
                class_counts,
            });
        }
        increments.push(xi);
        correspondences = neq.n;
        last = Some((neq, xi));

        if xi.magnitude() < reg.convergence {
            converged = true;
            break;
        }
        // The correspondence set changes every iteration, so a rising residual
        // alone is not divergence; the steps must not be shrinking either.
        let rising = residual > prev_residual * (1.0 + 1e-3);
        let shrinking = xi.magnitude() < prev_step;
        growth = if rising && !shrinking { growth + 1 } else { 0 };
        prev_step = xi.magnitude();
        if growth >= 3 {
            return Err(Error::RegistrationFailed(format!(
                "diverging: residual grew for 3 iterations (now {residual:.3e})"
            )));
        }
        prev_residual = residual;
        threshold = (threshold * reg.dist_decay).max(reg.dist_min);
    }

    let (neq, xi) = last.ok_or_else(|| Error::RegistrationFailed("no iterations run".into()))?;
    let quality = evaluate_quality(&neq, &xi, reg.sigma_floor)?;
    let overlap = overlap_ratio(&source.transformed(&transform), target, reg.overlap_dist);
    Ok(RegistrationResult {
        transform,
        iterations: increments.len(),
        increments,
        sigma: quality.sigma,
        information: quality.information,
        overlap,
        converged,
        correspondences,
        association_ms,
        estimation_ms,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeaturePoint;
    use nalgebra::Vector3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fp(p: Vector3<f64>, dir: Vector3<f64>) -> FeaturePoint {
        FeaturePoint {
            position: p,
            direction: dir,
            intensity: 40.0,
            height: 0.0,
            score: 1.0,
            frame_id: 0,
        }
    }

    /// Walls, ground, poles, a beam and corners, sampled at random.
    fn scene(seed: u64, n: usize) -> FeatureCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = FeatureCloud::default();
        for _ in 0..n {
            let (u, v) = (rng.random_range(-15.0..15.0), rng.random_range(-1.5..6.0));
            c.get_mut(FeatureClass::Facade).push(fp(Vector3::new(12.0, u, v), -Vector3::x()));
            c.get_mut(FeatureClass::Facade).push(fp(Vector3::new(u * 0.6, -9.0, v), Vector3::y()));
            let n2 = Vector3::new(1.0, 1.0, 0.0).normalize();
            c.get_mut(FeatureClass::Facade)
                .push(fp(Vector3::new(-10.0, 0.0, 0.0) + Vector3::new(-1.0, 1.0, 0.0).normalize() * u + Vector3::z() * v, n2));
            c.get_mut(FeatureClass::Ground).push(fp(
                Vector3::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0), -1.8),
                Vector3::z(),
            ));
        }
        for pole in [Vector3::new(4.0, 5.0, 0.0), Vector3::new(-6.0, -3.0, 0.0), Vector3::new(7.0, -6.0, 0.0)] {
            for k in 0..40 {
                c.get_mut(FeatureClass::Pillar)
                    .push(fp(pole + Vector3::new(0.0, 0.0, -1.8 + k as f64 * 0.15), Vector3::z()));
            }
        }
        for k in 0..60 {
            c.get_mut(FeatureClass::Beam)
                .push(fp(Vector3::new(-8.0 + k as f64 * 0.25, 6.0, 5.0), Vector3::x()));
        }
        for k in 0..40 {
            let k = k as f64;
            c.get_mut(FeatureClass::Vertex).push(fp(
                Vector3::new((k * 2.7) % 20.0 - 10.0, (k * 1.9) % 16.0 - 8.0, (k * 0.7) % 5.0 - 1.0),
                Vector3::zeros(),
            ));
        }
        c
    }

    #[test]
    fn identical_clouds_converge_immediately() {
        let c = scene(1, 300);
        let target = IndexedFeatures::new(c.clone());
        let r = mulls_icp(&c, &target, &Pose::identity(), &IcpParams::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
        assert!((r.transform.homogeneous() - Pose::identity().homogeneous()).abs().max() < 1e-12);
        assert_eq!(r.overlap, 1.0);
        assert_eq!(r.sigma, 1e-4);
    }

    #[test]
    fn recovers_known_transform() {
        let target_cloud = scene(2, 1500);
        let truth = Pose::from_axis_angle(&Vector3::new(0.2, -0.3, 1.0), 2f64.to_radians())
            .compose(&Pose::from_translation(Vector3::new(0.3, -0.1, 0.05)));
        let source = scene(3, 400).transformed(&truth.inverse());
        let target = IndexedFeatures::new(target_cloud);
        let mut params = IcpParams::default();
        params.trace = true;
        let r = mulls_icp(&source, &target, &Pose::identity(), &params).unwrap();
        let err = r.transform.between(&truth);
        assert!(r.converged);
        assert!(r.iterations <= 30);
        assert!(err.translation().norm() < 1e-3, "{:?}", err.translation());
        assert!(err.rotation_angle().to_degrees() < 0.01);
        assert_eq!(r.trace.len(), r.iterations);
        assert!(r.overlap > 0.9);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        r.write_trace_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), r.iterations + 1);
    }

    #[test]
    fn conjugation_invariance() {
        let target_cloud = scene(4, 800);
        let truth = Pose::from_axis_angle(&Vector3::new(0.0, 0.1, 1.0), 1.5f64.to_radians())
            .compose(&Pose::from_translation(Vector3::new(0.2, 0.1, 0.0)));
        let source = scene(5, 300).transformed(&truth.inverse());
        let mut params = IcpParams::default();
        params.reg.convergence = 1e-10;
        params.max_iterations = 60;
        let a = mulls_icp(&source, &IndexedFeatures::new(target_cloud.clone()), &Pose::identity(), &params).unwrap();

        let g = Pose::from_axis_angle(&Vector3::new(1.0, 2.0, 0.5), 0.4)
            .compose(&Pose::from_translation(Vector3::new(3.0, -2.0, 1.0)));
        let b = mulls_icp(
            &source.transformed(&g),
            &IndexedFeatures::new(target_cloud.transformed(&g)),
            &Pose::identity(),
            &params,
        )
        .unwrap();
        let expected = g.compose(&a.transform).compose(&g.inverse());
        assert!((expected.homogeneous() - b.transform.homogeneous()).abs().max() < 1e-6);
    }

    #[test]
    fn empty_target_is_under_determined() {
        let c = scene(6, 50);
        let far = IndexedFeatures::new(c.transformed(&Pose::from_translation(Vector3::new(500.0, 0.0, 0.0))));
        assert!(matches!(
            mulls_icp(&c, &far, &Pose::identity(), &IcpParams::default()),
            Err(Error::UnderDetermined { .. })
        ));
    }
}
