use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::io::StageTimings;
use crate::spatial::SpatialIndex;
use crate::types::Pose;

/// Segment lengths of the odometry benchmark (m).
pub const SEGMENT_LENGTHS: [f64; 8] = [100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SegmentError {
    pub length: f64,
    /// Mean translation error (% of length).
    pub ate: f64,
    /// Mean rotation error (deg / 100 m).
    pub are: f64,
    pub count: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StageStat {
    pub stage: &'static str,
    pub mean_ms: f64,
    pub p95_ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricReport {
    /// Average translation error (%).
    pub ate: f64,
    /// Average rotation error (deg / 100 m).
    pub are: f64,
    /// One entry per reachable length.
    pub segments: Vec<SegmentError>,
    pub evaluated_segments: usize,
    pub mapping_error: Option<f64>,
    pub timing: Vec<StageStat>,
}

impl MetricReport {
    pub fn is_empty(&self) -> bool {
        self.evaluated_segments == 0
    }
}

impl std::fmt::Display for MetricReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_empty() {
            writeln!(f, "ATE n/a  ARE n/a  (trajectory shorter than {} m)", SEGMENT_LENGTHS[0])?;
        } else {
            writeln!(f, "ATE {:.2}%  ARE {:.4} deg/100m  ({} segments)", self.ate, self.are, self.evaluated_segments)?;
            for s in &self.segments {
                writeln!(f, "  {:>4} m: ATE {:.2}%  ARE {:.4} deg/100m  (n={})", s.length, s.ate, s.are, s.count)?;
            }
        }
        if let Some(m) = self.mapping_error {
            writeln!(f, "mapping error {:.4} m", m)?;
        }
        for t in &self.timing {
            writeln!(f, "  {:<24} mean {:>8.2} ms  p95 {:>8.2} ms", t.stage, t.mean_ms, t.p95_ms)?;
        }
        Ok(())
    }
}

/// Cumulative path length along the poses' positions.
pub fn path_lengths(poses: &[Pose]) -> Vec<f64> {
    let mut out = Vec::with_capacity(poses.len());
    let mut acc = 0.0;
    for (i, p) in poses.iter().enumerate() {
        if i > 0 {
            acc += (p.translation() - poses[i - 1].translation()).norm();
        }
        out.push(acc);
    }
    out
}

/// Relative-pose errors over every start frame and every segment length
/// reachable from it; the segment ends at the first frame whose path
/// length reaches the start's plus `L`.
pub fn kitti_ate_are(estimated: &[Pose], ground_truth: &[Pose]) -> Result<MetricReport> {
    if estimated.len() != ground_truth.len() {
        return Err(Error::InvalidArgument(format!(
            "{} estimated vs {} ground-truth poses",
            estimated.len(),
            ground_truth.len()
        )));
    }
    if estimated.len() < 2 {
        return Err(Error::InsufficientData("need at least two poses".into()));
    }
    let dist = path_lengths(ground_truth);
    let mut report = MetricReport::default();
    let mut t_sum = 0.0;
    let mut r_sum = 0.0;
    for &length in &SEGMENT_LENGTHS {
        let mut seg = SegmentError {
            length,
            ..Default::default()
        };
        let mut end = 0;
        for start in 0..dist.len() {
            // Segment ends are monotone in the start frame.
            end = end.max(start);
            while end < dist.len() && dist[end] < dist[start] + length {
                end += 1;
            }
            if end == dist.len() {
                break;
            }
            let gt = ground_truth[start].between(&ground_truth[end]);
            let est = estimated[start].between(&estimated[end]);
            let err = est.between(&gt);
            let t = err.translation().norm() / length;
            let r = err.rotation_angle() / length;
            seg.ate += t;
            seg.are += r;
            seg.count += 1;
            t_sum += t;
            r_sum += r;
        }
        if seg.count > 0 {
            seg.ate = seg.ate / seg.count as f64 * 100.0;
            seg.are = (seg.are / seg.count as f64).to_degrees() * 100.0;
            report.evaluated_segments += seg.count;
            report.segments.push(seg);
        }
    }
    if report.evaluated_segments == 0 {
        log::warn!(
            "trajectory of {:.1} m is shorter than {} m; no segments evaluated",
            dist.last().copied().unwrap_or(0.0),
            SEGMENT_LENGTHS[0]
        );
    } else {
        let n = report.evaluated_segments as f64;
        report.ate = t_sum / n * 100.0;
        report.are = (r_sum / n).to_degrees() * 100.0;
    }
    Ok(report)
}

/// Mean nearest-neighbor distance from map points to the reference,
/// ignoring pairs farther than `max_dist`.
pub fn mapping_error(map: &[Vector3<f64>], reference: &[Vector3<f64>], max_dist: f64) -> Result<f64> {
    if map.is_empty() || reference.is_empty() {
        return Err(Error::InsufficientData("mapping error needs two nonempty clouds".into()));
    }
    let index = SpatialIndex::build(reference);
    let (sum, n) = map
        .iter()
        .filter_map(|p| index.nearest_within(p, max_dist).map(|(_, d)| d))
        .fold((0.0, 0usize), |(s, n), d| (s + d, n + 1));
    if n == 0 {
        return Err(Error::InsufficientData(format!("no map point within {max_dist} m of the reference")));
    }
    Ok(sum / n as f64)
}

fn mean_p95(mut v: Vec<f64>) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    v.sort_by(f64::total_cmp);
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let rank = ((0.95 * v.len() as f64).ceil() as usize).clamp(1, v.len());
    (mean, v[rank - 1])
}

/// Mean and 95th percentile per stage, in the order feature extraction,
/// map update, association, transform estimation, registration, total.
pub fn timing_summary(timings: &[StageTimings]) -> Vec<StageStat> {
    let stages: [(&'static str, fn(&StageTimings) -> f64); 6] = [
        ("feature extraction", |t| t.feature_ms),
        ("map update", |t| t.map_ms),
        ("association", |t| t.association_ms),
        ("transform estimation", |t| t.estimation_ms),
        ("registration", |t| t.registration_ms),
        ("total", |t| t.total_ms),
    ];
    stages
        .iter()
        .map(|(stage, get)| {
            let (mean_ms, p95_ms) = mean_p95(timings.iter().map(get).collect());
            StageStat { stage, mean_ms, p95_ms }
        })
        .collect()
}
