//! Trajectory and map metrics, and synthetic data generation.

pub mod metrics;
mod presets;
pub mod scene;

pub use metrics::{kitti_ate_are, mapping_error, path_lengths, timing_summary, MetricReport, SegmentError, StageStat, SEGMENT_LENGTHS};
pub use scene::SceneSpec;
