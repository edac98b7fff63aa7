//! Run configuration.
//!
//! Stored as a flat text file, one `section.key = value` per line, `#`
//! starts a comment. Unknown keys are rejected; missing keys keep their
//! defaults. `RunConfig::default().to_text()` prints every key with its
//! default value.

use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// How the residual kernel turns a normalized residual into a weight.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResidualWeighting {
    /// Iteratively-reweighted least squares weight `ψ(ε)/ε` of the kernel.
    Irls,
    /// The kernel's influence function `ψ(ε)` used directly as the weight.
    Influence,
}

impl FromStr for ResidualWeighting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "irls" => Ok(ResidualWeighting::Irls),
            "influence" => Ok(ResidualWeighting::Influence),
            other => Err(format!("expected `irls` or `influence`, got `{other}`")),
        }
    }
}

impl std::fmt::Display for ResidualWeighting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ResidualWeighting::Irls => "irls",
            ResidualWeighting::Influence => "influence",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundConfig {
    /// Cell size of the 2D grid on the reference plane (m).
    pub grid_size: f64,
    /// Max height above the cell minimum for rough ground (m).
    pub delta_h1: f64,
    /// Max drop from the cell minimum to the 3×3 neighborhood minimum (m).
    pub delta_h2: f64,
    pub ransac_iters: usize,
    /// Plane inlier distance for per-cell refinement (m).
    pub inlier_dist: f64,
}

impl Default for GroundConfig {
    fn default() -> Self {
        GroundConfig {
            grid_size: 2.0,
            delta_h1: 0.35,
            delta_h2: 0.25,
            ransac_iters: 30,
            inlier_dist: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureConfig {
    /// Neighbor count of the K-R neighborhood.
    pub knn_k: usize,
    /// Radius of the K-R neighborhood (m).
    pub knn_radius: f64,
    /// Neighborhoods smaller than this are unclassifiable.
    pub min_neighbors: usize,
    /// Nonground points are randomly reduced to this count before PCA.
    pub max_nonground: usize,
    pub linearity_min: f64,
    pub planarity_min: f64,
    pub curvature_min: f64,
    /// Minimum height above ground for roof points (m).
    pub roof_height_min: f64,
    /// Tolerance of the vertical/horizontal direction tests (deg).
    pub direction_angle_deg: f64,
    pub nms_radius_linear: f64,
    pub nms_radius_planar: f64,
    pub nms_radius_vertex: f64,
    pub ground_dense_voxel: f64,
    pub ground_sparse_voxel: f64,
    pub dense_voxel: f64,
    pub sparse_voxel: f64,
    pub ncc_radius: f64,
    pub intensity_max: f64,
    pub height_max: f64,
    pub seed: u64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            knn_k: 25,
            knn_radius: 1.0,
            min_neighbors: 8,
            max_nonground: 40_000,
            linearity_min: 0.6,
            planarity_min: 0.5,
            curvature_min: 0.1,
            roof_height_min: 2.0,
            direction_angle_deg: 30.0,
            nms_radius_linear: 0.15,
            nms_radius_planar: 0.15,
            nms_radius_vertex: 0.5,
            ground_dense_voxel: 0.6,
            ground_sparse_voxel: 1.2,
            dense_voxel: 0.3,
            sparse_voxel: 0.6,
            ncc_radius: 3.0,
            intensity_max: 255.0,
            height_max: 30.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegistrationConfig {
    /// Kernel shape coefficient κ.
    pub kappa: f64,
    /// Inlier noise threshold δ normalizing residuals (m).
    pub delta: f64,
    pub residual_weighting: ResidualWeighting,
    pub balanced_weighting: bool,
    pub intensity_weighting: bool,
    pub balanced_min: f64,
    pub balanced_max: f64,
    pub max_iterations: usize,
    /// Convergence threshold on ‖t‖ + ‖angles‖ of an increment.
    pub convergence: f64,
    /// Initial association distance (m).
    pub dist_initial: f64,
    /// Floor of the shrinking association distance (m).
    pub dist_min: f64,
    pub dist_decay: f64,
    /// Direction consistency tolerance (deg).
    pub direction_angle_deg: f64,
    /// Lower bound of the posterior standard deviation (m).
    pub sigma_floor: f64,
    /// Neighbor distance counted as overlap (m).
    pub overlap_dist: f64,
    pub max_condition: f64,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        RegistrationConfig {
            kappa: 1.0,
            delta: 0.1,
            residual_weighting: ResidualWeighting::Irls,
            balanced_weighting: true,
            intensity_weighting: true,
            balanced_min: 0.1,
            balanced_max: 10.0,
            max_iterations: 30,
            convergence: 1e-5,
            dist_initial: 1.5,
            dist_min: 0.3,
            dist_decay: 0.9,
            direction_angle_deg: 30.0,
            sigma_floor: 1e-4,
            overlap_dist: 0.5,
            max_condition: 1e12,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrontendConfig {
    /// Scan-to-scan iterations; 0 skips scan-to-scan registration.
    pub scan_to_scan_iterations: usize,
    pub scan_to_map_iterations: usize,
    pub motion_compensation: bool,
    /// Per-point interpolation instead of timestamp buckets.
    pub exact_compensation: bool,
    pub dynamic_filter: bool,
    /// Range gate of the dynamic filter (m).
    pub dynamic_range: f64,
    /// Same-class neighbor distance beyond which a point is dynamic (m).
    pub dynamic_dist: f64,
    pub crop_radius: f64,
    pub max_points_per_class: usize,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        FrontendConfig {
            scan_to_scan_iterations: 3,
            scan_to_map_iterations: 30,
            motion_compensation: true,
            exact_compensation: false,
            dynamic_filter: true,
            dynamic_range: 30.0,
            dynamic_dist: 0.5,
            crop_radius: 80.0,
            max_points_per_class: 20_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BackendConfig {
    pub enabled: bool,
    pub submap_max_translation: f64,
    pub submap_max_rotation_deg: f64,
    pub submap_max_frames: usize,
    /// Loop search radius (m).
    pub loop_radius: f64,
    /// Extra loop radius per submap not yet covered by an optimization (m).
    pub loop_radius_growth: f64,
    pub ncc_cos_min: f64,
    pub ransac_iterations: usize,
    pub ransac_inlier_dist: f64,
    pub ransac_min_inliers: usize,
    pub sigma_max: f64,
    pub overlap_min: f64,
    pub pgo_max_iterations: usize,
    pub pgo_relative_tolerance: f64,
    /// Use the odometry-predicted pose when coarse registration rejects.
    pub odometry_prior_fallback: bool,
    /// A loop edge may differ from the current estimate by at most
    /// `loop_gate_translation + loop_gate_drift · path` metres, where
    /// `path` is the odometry distance between the two submaps.
    pub loop_gate_translation: f64,
    pub loop_gate_drift: f64,
    pub loop_gate_rotation_deg: f64,
    pub seed: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            enabled: true,
            submap_max_translation: 30.0,
            submap_max_rotation_deg: 90.0,
            submap_max_frames: 100,
            loop_radius: 50.0,
            loop_radius_growth: 0.0,
            ncc_cos_min: 0.9,
            ransac_iterations: 1000,
            ransac_inlier_dist: 1.0,
            ransac_min_inliers: 8,
            sigma_max: 0.2,
            overlap_min: 0.3,
            pgo_max_iterations: 50,
            pgo_relative_tolerance: 1e-9,
            odometry_prior_fallback: true,
            loop_gate_translation: 2.0,
            loop_gate_drift: 0.05,
            loop_gate_rotation_deg: 10.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IoConfig {
    /// Elevation correction applied to every point on load (deg).
    pub intrinsic_correction_deg: f64,
}

impl Default for IoConfig {
    fn default() -> Self {
        IoConfig {
            intrinsic_correction_deg: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalConfig {
    /// Pairs farther apart are ignored by the mapping error (m).
    pub mapping_max_dist: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            mapping_max_dist: 2.0,
        }
    }
}

/// Every tunable parameter of the pipeline.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub ground: GroundConfig,
    pub features: FeatureConfig,
    pub registration: RegistrationConfig,
    pub frontend: FrontendConfig,
    pub backend: BackendConfig,
    pub io: IoConfig,
    pub eval: EvalConfig,
}

trait ConfigValue: Sized {
    fn parse_value(s: &str) -> Result<Self, String>;
    fn render(&self) -> String;
}

macro_rules! numeric_value {
    ($($t:ty),*) => {$(
        impl ConfigValue for $t {
            fn parse_value(s: &str) -> Result<Self, String> {
                s.parse::<$t>().map_err(|e| format!("expected {}: {e}", stringify!($t)))
            }
            fn render(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

numeric_value!(f64, usize, u64, bool);

impl ConfigValue for ResidualWeighting {
    fn parse_value(s: &str) -> Result<Self, String> {
        s.parse()
    }
    fn render(&self) -> String {
        self.to_string()
    }
}

/// Requirement checked on a value after loading.
#[derive(Clone, Copy)]
enum Bound {
    Positive,
    NonNegative,
    AtLeastOne,
    Any,
}

macro_rules! config_keys {
    ($($key:literal => $section:ident . $field:ident : $bound:ident),* $(,)?) => {
        impl RunConfig {
            /// Every accepted key, in file order.
            pub const KEYS: &'static [&'static str] = &[$($key),*];

            fn set(&mut self, key: &str, value: &str) -> Option<Result<(), String>> {
                match key {
                    $($key => Some(ConfigValue::parse_value(value).map(|v| self.$section.$field = v)),)*
                    _ => None,
                }
            }

            fn entries(&self) -> Vec<(&'static str, String, Bound, Option<f64>)> {
                vec![$((
                    $key,
                    ConfigValue::render(&self.$section.$field),
                    Bound::$bound,
                    ConfigValue::render(&self.$section.$field).parse::<f64>().ok(),
                )),*]
            }
        }
    };
}

config_keys! {
    "ground.grid_size" => ground.grid_size: Positive,
    "ground.delta_h1" => ground.delta_h1: Positive,
    "ground.delta_h2" => ground.delta_h2: Positive,
    "ground.ransac_iters" => ground.ransac_iters: AtLeastOne,
    "ground.inlier_dist" => ground.inlier_dist: Positive,
    "features.knn_k" => features.knn_k: AtLeastOne,
    "features.knn_radius" => features.knn_radius: Positive,
    "features.min_neighbors" => features.min_neighbors: AtLeastOne,
    "features.max_nonground" => features.max_nonground: AtLeastOne,
    "features.linearity_min" => features.linearity_min: Positive,
    "features.planarity_min" => features.planarity_min: Positive,
    "features.curvature_min" => features.curvature_min: Positive,
    "features.roof_height_min" => features.roof_height_min: Positive,
    "features.direction_angle_deg" => features.direction_angle_deg: Positive,
    "features.nms_radius_linear" => features.nms_radius_linear: NonNegative,
    "features.nms_radius_planar" => features.nms_radius_planar: NonNegative,
    "features.nms_radius_vertex" => features.nms_radius_vertex: NonNegative,
    "features.ground_dense_voxel" => features.ground_dense_voxel: Positive,
    "features.ground_sparse_voxel" => features.ground_sparse_voxel: Positive,
    "features.dense_voxel" => features.dense_voxel: Positive,
    "features.sparse_voxel" => features.sparse_voxel: Positive,
    "features.ncc_radius" => features.ncc_radius: Positive,
    "features.intensity_max" => features.intensity_max: Positive,
    "features.height_max" => features.height_max: Positive,
    "features.seed" => features.seed: Any,
    "registration.kappa" => registration.kappa: NonNegative,
    "registration.delta" => registration.delta: Positive,
    "registration.residual_weighting" => registration.residual_weighting: Any,
    "registration.balanced_weighting" => registration.balanced_weighting: Any,
    "registration.intensity_weighting" => registration.intensity_weighting: Any,
    "registration.balanced_min" => registration.balanced_min: Positive,
    "registration.balanced_max" => registration.balanced_max: Positive,
    "registration.max_iterations" => registration.max_iterations: AtLeastOne,
    "registration.convergence" => registration.convergence: Positive,
    "registration.dist_initial" => registration.dist_initial: Positive,
    "registration.dist_min" => registration.dist_min: Positive,
    "registration.dist_decay" => registration.dist_decay: Positive,
    "registration.direction_angle_deg" => registration.direction_angle_deg: Positive,
    "registration.sigma_floor" => registration.sigma_floor: Positive,
    "registration.overlap_dist" => registration.overlap_dist: Positive,
    "registration.max_condition" => registration.max_condition: Positive,
    "frontend.scan_to_scan_iterations" => frontend.scan_to_scan_iterations: Any,
    "frontend.scan_to_map_iterations" => frontend.scan_to_map_iterations: AtLeastOne,
    "frontend.motion_compensation" => frontend.motion_compensation: Any,
    "frontend.exact_compensation" => frontend.exact_compensation: Any,
    "frontend.dynamic_filter" => frontend.dynamic_filter: Any,
    "frontend.dynamic_range" => frontend.dynamic_range: Positive,
    "frontend.dynamic_dist" => frontend.dynamic_dist: Positive,
    "frontend.crop_radius" => frontend.crop_radius: Positive,
    "frontend.max_points_per_class" => frontend.max_points_per_class: AtLeastOne,
    "backend.enabled" => backend.enabled: Any,
    "backend.submap_max_translation" => backend.submap_max_translation: Positive,
    "backend.submap_max_rotation_deg" => backend.submap_max_rotation_deg: Positive,
    "backend.submap_max_frames" => backend.submap_max_frames: AtLeastOne,
    "backend.loop_radius" => backend.loop_radius: NonNegative,
    "backend.loop_radius_growth" => backend.loop_radius_growth: NonNegative,
    "backend.ncc_cos_min" => backend.ncc_cos_min: Positive,
    "backend.ransac_iterations" => backend.ransac_iterations: AtLeastOne,
    "backend.ransac_inlier_dist" => backend.ransac_inlier_dist: Positive,
    "backend.ransac_min_inliers" => backend.ransac_min_inliers: AtLeastOne,
    "backend.sigma_max" => backend.sigma_max: Positive,
    "backend.overlap_min" => backend.overlap_min: Positive,
    "backend.pgo_max_iterations" => backend.pgo_max_iterations: AtLeastOne,
    "backend.pgo_relative_tolerance" => backend.pgo_relative_tolerance: Positive,
    "backend.odometry_prior_fallback" => backend.odometry_prior_fallback: Any,
    "backend.loop_gate_translation" => backend.loop_gate_translation: Positive,
    "backend.loop_gate_drift" => backend.loop_gate_drift: NonNegative,
    "backend.loop_gate_rotation_deg" => backend.loop_gate_rotation_deg: Positive,
    "backend.seed" => backend.seed: Any,
    "io.intrinsic_correction_deg" => io.intrinsic_correction_deg: Any,
    "eval.mapping_max_dist" => eval.mapping_max_dist: Positive,
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let malformed = |reason: &str| Error::Config {
                line: line_no,
                key: line.to_string(),
                reason: reason.to_string(),
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| malformed("expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() || value.contains('=') {
                return Err(malformed("expected `key = value`"));
            }
            match cfg.set(key, value) {
                None => {
                    return Err(Error::Config {
                        line: line_no,
                        key: key.to_string(),
                        reason: "unknown key".into(),
                    })
                }
                Some(Err(reason)) => {
                    return Err(Error::Config {
                        line: line_no,
                        key: key.to_string(),
                        reason,
                    })
                }
                Some(Ok(())) => {}
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks positivity and iteration-cap requirements.
    pub fn validate(&self) -> Result<()> {
        for (key, _, bound, value) in self.entries() {
            let ok = match (bound, value) {
                (Bound::Positive, Some(v)) => v > 0.0 && v.is_finite(),
                (Bound::NonNegative, Some(v)) => v >= 0.0 && v.is_finite(),
                (Bound::AtLeastOne, Some(v)) => v >= 1.0,
                (Bound::Any, _) => true,
                (_, None) => false,
            };
            if !ok {
                return Err(Error::Config {
                    line: 0,
                    key: key.to_string(),
                    reason: "value out of range".into(),
                });
            }
        }
        if self.registration.dist_min > self.registration.dist_initial {
            return Err(Error::Config {
                line: 0,
                key: "registration.dist_min".into(),
                reason: "must not exceed registration.dist_initial".into(),
            });
        }
        Ok(())
    }

    /// Renders every key with its current value.
    pub fn to_text(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v, _, _)| format!("{k} = {v}\n"))
            .collect()
    }
}
