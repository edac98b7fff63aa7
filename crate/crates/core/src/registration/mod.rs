//! Multi-metric linear least-squares ICP over classified features.

pub mod association;
pub mod icp;
pub mod solve;
pub mod weights;

pub use association::{associate, overlap_ratio, IndexedFeatures};
pub use icp::{apply_weights, mulls_icp, IcpParams, RegistrationResult, TraceRow};
pub use solve::{build_rows, evaluate_quality, solve_step, Correspondence, NormalEquations, Quality, Rows};
pub use weights::{irls_weight, weight_balanced, weight_intensity, weight_residual};
