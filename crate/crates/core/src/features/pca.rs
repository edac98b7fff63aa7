//! Local covariance analysis over K-R neighborhoods.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::spatial::SpatialIndex;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PcaResult {
    /// λ1 ≥ λ2 ≥ λ3 ≥ 0.
    pub eigenvalues: Vector3<f64>,
    /// Eigenvector of λ1.
    pub primary: Vector3<f64>,
    /// Eigenvector of λ2.
    pub middle: Vector3<f64>,
    /// Eigenvector of λ3.
    pub normal: Vector3<f64>,
    pub linearity: f64,
    pub planarity: f64,
    pub curvature: f64,
    pub neighbors: usize,
}

/// Mean-centered covariance with 1/|N| normalization.
pub fn covariance(points: &[Vector3<f64>]) -> Option<(Vector3<f64>, Matrix3<f64>)> {
    if points.is_empty() {
        return None;
    }
    let n = points.len() as f64;
    let mean = points.iter().sum::<Vector3<f64>>() / n;
    let mut c = Matrix3::zeros();
    for p in points {
        let d = p - mean;
        c += d * d.transpose();
    }
    Some((mean, c / n))
}

/// Eigen-analysis of a point set. `None` when the set is empty or all
/// points coincide.
pub fn pca_of(points: &[Vector3<f64>]) -> Option<PcaResult> {
    let (_, c) = covariance(points)?;
    let eig = c.symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lambda = Vector3::new(
        eig.eigenvalues[order[0]].max(0.0),
        eig.eigenvalues[order[1]].max(0.0),
        eig.eigenvalues[order[2]].max(0.0),
    );
    if !(lambda[0] > 0.0) {
        return None;
    }
    let col = |k: usize| -> Vector3<f64> { eig.eigenvectors.column(order[k]).normalize() };
    let primary = col(0);
    let middle = col(1);
    // Right-handed frame; exact orthogonality regardless of eigen solver round-off.
    let normal = primary.cross(&middle).normalize();
    Some(PcaResult {
        eigenvalues: lambda,
        primary,
        middle,
        normal,
        linearity: (lambda[0] - lambda[1]) / lambda[0],
        planarity: (lambda[1] - lambda[2]) / lambda[0],
        curvature: lambda[2] / lambda.sum(),
        neighbors: points.len(),
    })
}

/// PCA over the `k` nearest points within `radius` of every query point
/// (the query itself included when it is part of `points`). Points with
/// fewer than `k_min` neighbors or a degenerate neighborhood map to `None`.
pub fn pca_neighborhood(
    points: &[Vector3<f64>],
    index: &SpatialIndex,
    k: usize,
    radius: f64,
    k_min: usize,
) -> Vec<Option<PcaResult>> {
    points
        .par_iter()
        .map_init(Vec::new, |buf, q| {
            let nn = index.k_nearest_within(q, k, radius);
            if nn.len() < k_min.max(3) {
                return None;
            }
            buf.clear();
            buf.extend(nn.iter().map(|&(i, _)| points[i]));
            pca_of(buf)
        })
        .collect()
}
