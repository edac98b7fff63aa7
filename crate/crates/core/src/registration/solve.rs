//! Linearized multi-metric least squares over a 6-dof increment
//! `ξ = (t, angles)`.

use nalgebra::{Matrix3, Matrix6, RowVector6, Vector3, Vector6};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{FeatureClass, Metric};
use crate::types::{skew, TangentVector};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Correspondence {
    /// Source point, already moved by the current estimate.
    pub source: Vector3<f64>,
    pub target: Vector3<f64>,
    pub metric: Metric,
    /// Target normal (plane) or line direction (line); `None` for points.
    pub direction: Option<Vector3<f64>>,
    pub class: FeatureClass,
    pub intensity_diff: f64,
    /// Metric distance before the update (m).
    pub distance: f64,
    pub weight: f64,
}

impl Correspondence {
    pub fn rows(&self) -> Rows {
        build_rows(self)
    }
}

/// Up to three observation rows `A ξ ≈ b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rows {
    pub a: [RowVector6<f64>; 3],
    pub b: [f64; 3],
    pub len: usize,
}

impl Rows {
    pub fn iter(&self) -> impl Iterator<Item = (&RowVector6<f64>, f64)> {
        self.a[..self.len].iter().zip(self.b[..self.len].iter().copied())
    }
}

fn row_of(t: &Matrix3<f64>, r: &Matrix3<f64>, i: usize) -> RowVector6<f64> {
    RowVector6::new(t[(i, 0)], t[(i, 1)], t[(i, 2)], r[(i, 0)], r[(i, 1)], r[(i, 2)])
}

/// Observation rows for one correspondence, linearized at ξ = 0 with
/// `R ≈ I + [angles]×`:
/// - point-to-point: `[I₃  −[p]×]`, `q − p`
/// - point-to-plane: `[nᵀ  (p×n)ᵀ]`, `nᵀ(q − p)`
/// - point-to-line: `[[v]×  (vᵀp)I₃ − p vᵀ]`, `v × (q − p)`
pub fn build_rows(c: &Correspondence) -> Rows {
    let p = c.source;
    let q = c.target;
    let zero = RowVector6::zeros();
    match (c.metric, c.direction) {
        (Metric::PointToPlane, Some(n)) => {
            let pn = p.cross(&n);
            Rows {
                a: [RowVector6::new(n.x, n.y, n.z, pn.x, pn.y, pn.z), zero, zero],
                b: [n.dot(&(q - p)), 0.0, 0.0],
                len: 1,
            }
        }
        (Metric::PointToLine, Some(v)) => {
            let t = skew(&v);
            let r = Matrix3::identity() * v.dot(&p) - p * v.transpose();
            let b = v.cross(&(q - p));
            Rows {
                a: [row_of(&t, &r, 0), row_of(&t, &r, 1), row_of(&t, &r, 2)],
                b: [b.x, b.y, b.z],
                len: 3,
            }
        }
        _ => {
            let t = Matrix3::identity();
            let r = -skew(&p);
            let b = q - p;
            Rows {
                a: [row_of(&t, &r, 0), row_of(&t, &r, 1), row_of(&t, &r, 2)],
                b: [b.x, b.y, b.z],
                len: 3,
            }
        }
    }
}

/// Accumulated weighted system `AᵀPA`, `AᵀPb`, `bᵀPb`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalEquations {
    pub ata: Matrix6<f64>,
    pub atb: Vector6<f64>,
    pub btb: f64,
    /// Correspondence count.
    pub n: usize,
    /// Scalar observation rows.
    pub rows: usize,
}

impl Default for NormalEquations {
    fn default() -> Self {
        NormalEquations {
            ata: Matrix6::zeros(),
            atb: Vector6::zeros(),
            btb: 0.0,
            n: 0,
            rows: 0,
        }
    }
}

impl NormalEquations {
    pub fn add(&mut self, c: &Correspondence) {
        for (a, b) in build_rows(c).iter() {
            let wa = a.transpose() * c.weight;
            self.ata += wa * a;
            self.atb += wa * b;
            self.btb += c.weight * b * b;
            self.rows += 1;
        }
        self.n += 1;
    }

    pub fn merge(&mut self, other: &NormalEquations) {
        self.ata += other.ata;
        self.atb += other.atb;
        self.btb += other.btb;
        self.n += other.n;
        self.rows += other.rows;
    }

    /// Sequential accumulation in input order.
    pub fn sequential(corrs: &[Correspondence]) -> Self {
        let mut neq = NormalEquations::default();
        corrs.iter().for_each(|c| neq.add(c));
        neq
    }

    /// Parallel accumulation over fixed-size chunks; partial sums are
    /// merged in chunk order so the result does not depend on scheduling.
    pub fn accumulate(corrs: &[Correspondence]) -> Self {
        const CHUNK: usize = 512;
        let partials: Vec<NormalEquations> = corrs.par_chunks(CHUNK).map(Self::sequential).collect();
        let mut neq = NormalEquations::default();
        partials.iter().for_each(|p| neq.merge(p));
        neq
    }

    /// Weighted squared residual `(Aξ − b)ᵀP(Aξ − b)` after applying `ξ`.
    pub fn residual_after(&self, xi: &Vector6<f64>) -> f64 {
        (xi.dot(&(self.ata * xi)) - 2.0 * xi.dot(&self.atb) + self.btb).max(0.0)
    }
}

const DOF_NAMES: [&str; 6] = [
    "translation along x",
    "translation along y",
    "translation along z",
    "rotation about x",
    "rotation about y",
    "rotation about z",
];

fn describe_direction(v: &Vector6<f64>) -> String {
    let t = v.fixed_rows::<3>(0).norm();
    let r = v.fixed_rows::<3>(3).norm();
    let (offset, axis) = if t >= r {
        (0, v.fixed_rows::<3>(0).normalize())
    } else {
        (3, v.fixed_rows::<3>(3).normalize())
    };
    let k = axis.iamax();
    if axis[k].abs() > 0.95 {
        DOF_NAMES[offset + k].to_string()
    } else {
        let kind = if offset == 0 { "translation along" } else { "rotation about" };
        format!("{kind} ({:.2}, {:.2}, {:.2})", axis.x, axis.y, axis.z)
    }
}

/// Solves `AᵀPA ξ = AᵀPb`. Fails with [`Error::UnderDetermined`] below six
/// rows and with [`Error::Degenerate`] (naming the weakest direction) when
/// the condition number reaches `max_condition`.
pub fn solve_step(neq: &NormalEquations, max_condition: f64) -> Result<TangentVector> {
    if neq.rows < 6 {
        return Err(Error::UnderDetermined { rows: neq.rows });
    }
    let eig = neq.ata.symmetric_eigen();
    let (imin, lmin) = eig.eigenvalues.argmin();
    let lmax = eig.eigenvalues.max();
    let condition = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
    if !(condition < max_condition) {
        let weakest: Vector6<f64> = eig.eigenvectors.column(imin).into();
        return Err(Error::Degenerate {
            direction: describe_direction(&weakest),
            condition,
        });
    }
    let xi = match neq.ata.cholesky() {
        Some(ch) => ch.solve(&neq.atb),
        // Positive definite by the eigen check; round-off fallback.
        None => eig.eigenvectors
            * Matrix6::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l))
            * eig.eigenvectors.transpose()
            * neq.atb,
    };
    Ok(TangentVector::from_vector(&xi))
}

/// Posterior standard deviation and information matrix of an estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quality {
    pub sigma: f64,
    pub information: Matrix6<f64>,
}

/// `σ̂² = (Aξ − b)ᵀP(Aξ − b) / (rows − 6)`, floored at `sigma_floor`;
/// information `AᵀPA / σ̂²`.
pub fn evaluate_quality(neq: &NormalEquations, xi: &TangentVector, sigma_floor: f64) -> Result<Quality> {
    if neq.rows <= 6 {
        return Err(Error::InsufficientData(format!(
            "{} observation rows; posterior needs more than 6",
            neq.rows
        )));
    }
    let v = xi.to_vector();
    let sigma2 = neq.residual_after(&v) / (neq.rows - 6) as f64;
    let sigma = sigma2.sqrt().max(sigma_floor);
    let mut information = neq.ata / (sigma * sigma);
    information = (information + information.transpose()) * 0.5;
    Ok(Quality { sigma, information })
}
