use std::path::Path;

use crate::error::{Error, Result};
use crate::types::Pose;

/// Wall-clock milliseconds spent per stage of one frame.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StageTimings {
    pub feature_ms: f64,
    pub registration_ms: f64,
    /// Part of `registration_ms` spent on closest-point association.
    pub association_ms: f64,
    /// Part of `registration_ms` spent building and solving the linear system.
    pub estimation_ms: f64,
    pub map_ms: f64,
    pub total_ms: f64,
    /// Registration iterations summed over scan-to-scan and scan-to-map.
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub frame_id: u64,
    pub pose: Pose,
    pub timings: StageTimings,
}

/// Ordered per-frame records with strictly increasing frame ids.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    records: Vec<TrajectoryRecord>,
}

impl Trajectory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: TrajectoryRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if record.frame_id <= last.frame_id {
                return Err(Error::InvalidArgument(format!(
                    "frame id {} after {}",
                    record.frame_id, last.frame_id
                )));
            }
        }
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[TrajectoryRecord] {
        &self.records
    }

    pub fn records_mut(&mut self) -> &mut [TrajectoryRecord] {
        &mut self.records
    }

    pub fn poses(&self) -> Vec<Pose> {
        self.records.iter().map(|r| r.pose).collect()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

const HEADER: [&str; 17] = [
    "frame_id",
    "r00",
    "r01",
    "r02",
    "tx",
    "r10",
    "r11",
    "r12",
    "ty",
    "r20",
    "r21",
    "r22",
    "tz",
    "t_feature_ms",
    "t_reg_ms",
    "t_map_ms",
    "t_total_ms",
];

/// Writes `frame_id, 12 pose reals (row-major 3×4), t_feature_ms, t_reg_ms, t_map_ms, t_total_ms`.
pub fn write_trajectory_csv(trajectory: &Trajectory, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let csv_err = |e: csv::Error| Error::io(path, e.into());
    let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
    writer.write_record(HEADER).map_err(csv_err)?;
    for r in trajectory.records() {
        let mut row = vec![r.frame_id.to_string()];
        row.extend(r.pose.to_row_major_3x4().iter().map(|v| format!("{v:e}")));
        row.extend(
            [
                r.timings.feature_ms,
                r.timings.registration_ms,
                r.timings.map_ms,
                r.timings.total_ms,
            ]
            .iter()
            .map(|v| format!("{v:.3}")),
        );
        writer.write_record(&row).map_err(csv_err)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn read_trajectory_csv(path: impl AsRef<Path>) -> Result<Trajectory> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::io(path, e.into()))?;
    let mut trajectory = Trajectory::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::Parse {
            line,
            reason: e.to_string(),
        })?;
        if row.len() != HEADER.len() {
            return Err(Error::Parse {
                line,
                reason: format!("expected {} columns, found {}", HEADER.len(), row.len()),
            });
        }
        let num = |k: usize| {
            row[k].parse::<f64>().map_err(|e| Error::Parse {
                line,
                reason: format!("column {}: {e}", HEADER[k]),
            })
        };
        let frame_id = row[0].parse::<u64>().map_err(|e| Error::Parse {
            line,
            reason: format!("frame_id: {e}"),
        })?;
        let mut m = [0.0; 12];
        for (k, v) in m.iter_mut().enumerate() {
            *v = num(k + 1)?;
        }
        let timings = StageTimings {
            feature_ms: num(13)?,
            registration_ms: num(14)?,
            map_ms: num(15)?,
            total_ms: num(16)?,
            ..Default::default()
        };
        trajectory
            .push(TrajectoryRecord {
                frame_id,
                pose: Pose::from_row_major_3x4(&m),
                timings,
            })
            .map_err(|e| Error::Parse {
                line,
                reason: e.to_string(),
            })?;
    }
    Ok(trajectory)
}
