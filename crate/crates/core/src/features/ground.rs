//! Dual-threshold grid ground filter and per-cell plane refinement.

use std::collections::{BTreeMap, HashMap};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::Pose;

pub type CellKey = (i64, i64);

/// Partition of a cloud into rough ground and nonground points.
#[derive(Clone, Debug, Default)]
pub struct GroundSplit {
    pub rough_ground: Vec<usize>,
    pub nonground: Vec<usize>,
    /// Rough ground indices per grid cell, ordered by cell.
    pub cells: BTreeMap<CellKey, Vec<usize>>,
    /// Height of every input point above the reference plane.
    pub heights: Vec<f64>,
    /// Height of every input point above the lowest point of its 3×3 cell neighborhood.
    pub height_above_ground: Vec<f64>,
    /// Set when every point fell into a single cell.
    pub single_cell: bool,
}

/// Splits points by comparing heights against per-cell minima.
///
/// `reference_plane` maps plane coordinates to cloud coordinates; heights
/// are plane-frame z and the grid lies on the plane-frame xy.
/// A point is nonground iff `h − h_min(cell) > delta_h1` or
/// `h_min(cell) − h_min(3×3 neighborhood) > delta_h2`.
pub fn ground_filter(
    points: &[Vector3<f64>],
    grid_size: f64,
    delta_h1: f64,
    delta_h2: f64,
    reference_plane: &Pose,
) -> Result<GroundSplit> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("ground filter needs a nonempty cloud".into()));
    }
    if grid_size <= 0.0 {
        return Err(Error::InvalidArgument("grid size must be positive".into()));
    }
    let to_plane = reference_plane.inverse();
    let local: Vec<Vector3<f64>> = points.iter().map(|p| to_plane.apply(p)).collect();
    let key_of = |p: &Vector3<f64>| -> CellKey {
        (
            (p.x / grid_size).floor() as i64,
            (p.y / grid_size).floor() as i64,
        )
    };

    let mut cell_min: HashMap<CellKey, f64> = HashMap::new();
    for p in &local {
        let m = cell_min.entry(key_of(p)).or_insert(f64::INFINITY);
        *m = m.min(p.z);
    }
    let neighborhood_min = |key: CellKey| -> f64 {
        let mut m = f64::INFINITY;
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(&h) = cell_min.get(&(key.0 + dx, key.1 + dy)) {
                    m = m.min(h);
                }
            }
        }
        m
    };
    let mut neighborhood: HashMap<CellKey, f64> = HashMap::with_capacity(cell_min.len());
    for &key in cell_min.keys() {
        neighborhood.insert(key, neighborhood_min(key));
    }

    let mut split = GroundSplit {
        heights: Vec::with_capacity(points.len()),
        height_above_ground: Vec::with_capacity(points.len()),
        single_cell: cell_min.len() == 1,
        ..Default::default()
    };
    for (i, p) in local.iter().enumerate() {
        let key = key_of(p);
        let h_min = cell_min[&key];
        let h_neimin = neighborhood[&key];
        split.heights.push(p.z);
        split.height_above_ground.push(p.z - h_neimin);
        if p.z - h_min > delta_h1 || h_min - h_neimin > delta_h2 {
            split.nonground.push(i);
        } else {
            split.rough_ground.push(i);
            split.cells.entry(key).or_default().push(i);
        }
    }
    Ok(split)
}

/// Fitted plane `normal · x = offset` with unit normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Plane {
    pub normal: Vector3<f64>,
    pub offset: f64,
}

impl Plane {
    fn through(a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>) -> Option<Plane> {
        let n = (b - a).cross(&(c - a));
        let norm = n.norm();
        let scale = (b - a).norm().max((c - a).norm()).max(1e-12);
        if norm < 1e-9 * scale * scale {
            return None;
        }
        let normal = n / norm;
        Some(Plane {
            normal,
            offset: normal.dot(a),
        })
    }

    /// Total least-squares plane through the centroid.
    pub fn fit<'a>(points: impl IntoIterator<Item = &'a Vector3<f64>>) -> Option<Plane> {
        let pts: Vec<&Vector3<f64>> = points.into_iter().collect();
        if pts.len() < 3 {
            return None;
        }
        let n = pts.len() as f64;
        let centroid = pts.iter().fold(Vector3::zeros(), |acc, p| acc + *p) / n;
        let mut cov = nalgebra::Matrix3::zeros();
        for p in &pts {
            let d = *p - centroid;
            cov += d * d.transpose();
        }
        let eig = cov.symmetric_eigen();
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        // Collinear sets have two vanishing eigenvalues.
        if eig.eigenvalues[order[1]] <= 1e-12 * eig.eigenvalues[order[2]].max(1e-300) {
            return None;
        }
        let normal: Vector3<f64> = eig.eigenvectors.column(order[0]).into();
        Some(Plane {
            normal,
            offset: normal.dot(&centroid),
        })
    }

    pub fn distance(&self, p: &Vector3<f64>) -> f64 {
        (self.normal.dot(p) - self.offset).abs()
    }

    fn oriented_along(mut self, up: &Vector3<f64>) -> Plane {
        if self.normal.dot(up) < 0.0 {
            self.normal = -self.normal;
            self.offset = -self.offset;
        }
        self
    }
}

/// A refined ground point and the normal of its cell's plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroundPoint {
    pub index: usize,
    pub normal: Vector3<f64>,
}

/// Fits a plane per cell by RANSAC followed by a least-squares refit on
/// the inliers. Cells with fewer than three points or without a
/// non-collinear sample are dropped. Normals point along `up`.
pub fn refine_ground(
    points: &[Vector3<f64>],
    cells: &BTreeMap<CellKey, Vec<usize>>,
    ransac_iters: usize,
    inlier_dist: f64,
    up: &Vector3<f64>,
    seed: u64,
) -> Vec<GroundPoint> {
    let mut out = Vec::new();
    for (key, members) in cells {
        let cell_seed = seed ^ (key.0 as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
            ^ (key.1 as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
        if let Some(plane) = fit_cell(points, members, ransac_iters, inlier_dist, cell_seed) {
            let plane = plane.oriented_along(up);
            out.extend(
                members
                    .iter()
                    .filter(|&&i| plane.distance(&points[i]) <= inlier_dist)
                    .map(|&index| GroundPoint {
                        index,
                        normal: plane.normal,
                    }),
            );
        }
    }
    out.sort_by_key(|g| g.index);
    out
}

fn fit_cell(
    points: &[Vector3<f64>],
    members: &[usize],
    iters: usize,
    inlier_dist: f64,
    seed: u64,
) -> Option<Plane> {
    let n = members.len();
    if n < 3 {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = |plane: &Plane| {
        members
            .iter()
            .filter(|&&i| plane.distance(&points[i]) <= inlier_dist)
            .count()
    };
    let mut best: Option<(usize, Plane)> = None;
    for _ in 0..iters {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        let c = rng.random_range(0..n);
        if a == b || b == c || a == c {
            continue;
        }
        let Some(plane) = Plane::through(
            &points[members[a]],
            &points[members[b]],
            &points[members[c]],
        ) else {
            continue;
        };
        let inliers = count(&plane);
        if best.as_ref().is_none_or(|(k, _)| inliers > *k) {
            best = Some((inliers, plane));
        }
        if inliers == n {
            break;
        }
    }
    let (_, hypothesis) = best?;
    let inliers = members
        .iter()
        .filter(|&&i| hypothesis.distance(&points[i]) <= inlier_dist)
        .map(|&i| &points[i]);
    Plane::fit(inliers).or(Some(hypothesis))
}
