use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::types::{Point, PointCloud, Pose};

const RECORD_BYTES: usize = 16;

/// Reads a velodyne scan: packed little-endian `f32` quadruples `x y z intensity`.
pub fn read_kitti_bin(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % RECORD_BYTES != 0 {
        return Err(Error::MalformedFile {
            path: path.to_path_buf(),
            reason: format!("size {} is not a multiple of {RECORD_BYTES}", bytes.len()),
        });
    }
    let points = bytes
        .chunks_exact(RECORD_BYTES)
        .map(|rec| {
            let f = |i: usize| f32::from_le_bytes([rec[i], rec[i + 1], rec[i + 2], rec[i + 3]]);
            Point::new(f(0), f(4), f(8), f(12))
        })
        .collect();
    Ok(PointCloud::new(points, frame_id_from_name(path)))
}

pub fn write_kitti_bin(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(cloud.len() * RECORD_BYTES);
    for p in &cloud.points {
        for v in [p.position.x, p.position.y, p.position.z, p.intensity] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn frame_id_from_name(path: &Path) -> u64 {
    path.file_stem()
        .and_then(|s| s.to_str())
        .and_then(|s| s.parse().ok())
        .unwrap_or(0)
}

/// Sorted `.bin` files of a directory, or of its `velodyne/` subdirectory.
pub fn list_kitti_scans(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let nested = dir.join("velodyne");
    let dir = if nested.is_dir() { nested } else { dir.to_path_buf() };
    let mut scans: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(|e| Error::io(&dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "bin"))
        .collect();
    scans.sort();
    Ok(scans)
}

/// Reads a pose file with one row-major 3×4 `[R|t]` per line.
pub fn read_kitti_poses(path: impl AsRef<Path>) -> Result<Vec<Pose>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut poses = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        poses.push(parse_pose_line(&line, i + 1)?);
    }
    Ok(poses)
}

pub(crate) fn parse_pose_line(line: &str, line_no: usize) -> Result<Pose> {
    let values: Vec<f64> = line
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>().map_err(|e| Error::Parse {
                line: line_no,
                reason: format!("`{tok}`: {e}"),
            })
        })
        .collect::<Result<_>>()?;
    let values: [f64; 12] = values.try_into().map_err(|v: Vec<f64>| Error::Parse {
        line: line_no,
        reason: format!("expected 12 values, found {}", v.len()),
    })?;
    Ok(Pose::from_row_major_3x4(&values))
}

pub fn write_kitti_poses(poses: &[Pose], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for pose in poses {
        let row: Vec<String> = pose
            .to_row_major_3x4()
            .iter()
            .map(|v| format!("{v:e}"))
            .collect();
        writeln!(out, "{}", row.join(" ")).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Raises every point's elevation angle about the sensor origin by
/// `correction` radians, keeping range and azimuth. Points within
/// `correction` of the zenith wrap over it and are not invertible.
pub fn correct_intrinsic_angle(cloud: &PointCloud, correction: f64) -> PointCloud {
    if correction == 0.0 {
        return cloud.clone();
    }
    let origin = cloud.sensor_origin;
    let points = cloud
        .points
        .iter()
        .map(|p| Point {
            position: correct_elevation(&p.xyz(), &origin, correction).cast(),
            ..*p
        })
        .collect();
    PointCloud {
        points,
        ..cloud.clone()
    }
}

/// Single-point form of [`correct_intrinsic_angle`].
pub fn correct_elevation(p: &Vector3<f64>, origin: &Vector3<f64>, correction: f64) -> Vector3<f64> {
    let v = p - origin;
    let range = v.norm();
    if range == 0.0 {
        return *p;
    }
    let azimuth = v.y.atan2(v.x);
    let elevation = v.z.atan2(v.x.hypot(v.y)) + correction;
    let (sin_e, cos_e) = elevation.sin_cos();
    let (sin_a, cos_a) = azimuth.sin_cos();
    origin + range * Vector3::new(cos_e * cos_a, cos_e * sin_a, sin_e)
}
