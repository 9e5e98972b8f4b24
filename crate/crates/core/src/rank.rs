//! Spatial signs and affine-invariant multivariate ranks.
//!
//! The rank of observation `i` is the average spatial sign of the transformed
//! pairwise differences `A (z_i − z_j)`. The transformation `A` is chosen by a
//! fixed-point iteration so that the ranks satisfy the sphericity condition
//! `(M/n) Σ R Rᵀ = (Σ ‖R‖² / n) I`.
//!
//! Ranks cost `O(n² M)` per evaluation and are recomputed at every fixed-point
//! step.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 100;

/// `z / ‖z‖₂`, or the zero vector for `z = 0`.
pub fn spatial_sign(z: &[f64]) -> Vec<f64> {
    let norm = z.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        vec![0.0; z.len()]
    } else {
        z.iter().map(|x| x / norm).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TylerOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for TylerOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RankSet {
    /// `n × M`.
    pub ranks: DMatrix<f64>,
    /// `M × M` transformation applied to pairwise differences.
    pub transform: DMatrix<f64>,
    /// `‖(M/n) Σ R Rᵀ − (sum_sq/n) I‖_F`.
    pub sphericity_residual: f64,
    /// `Σ ‖R_i‖²`.
    pub sum_sq: f64,
    /// Fixed-point steps taken to reach `transform`.
    pub iterations: usize,
}

impl RankSet {
    pub fn n(&self) -> usize {
        self.ranks.nrows()
    }

    pub fn dim(&self) -> usize {
        self.ranks.ncols()
    }

    /// Row `i` as a slice-friendly vector.
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.ranks.row(i).iter().copied().collect()
    }
}

/// Row-major copy of `A zᵢ` for every row of `scores`.
fn transformed_rows(scores: &DMatrix<f64>, transform: &DMatrix<f64>) -> Vec<f64> {
    let y = scores * transform.transpose();
    let (n, m) = y.shape();
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        for c in 0..m {
            out[i * m + c] = y[(i, c)];
        }
    }
    out
}

/// Raw ranks, row-major `n × M`.
fn rank_rows(y: &[f64], n: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    let inv_n = 1.0 / n as f64;
    out.par_chunks_mut(m).enumerate().for_each(|(i, acc)| {
        let yi = &y[i * m..(i + 1) * m];
        let mut diff = vec![0.0; m];
        for j in 0..n {
            let yj = &y[j * m..(j + 1) * m];
            let mut norm2 = 0.0;
            for c in 0..m {
                let d = yi[c] - yj[c];
                diff[c] = d;
                norm2 += d * d;
            }
            if norm2 > 0.0 {
                let inv = 1.0 / norm2.sqrt();
                for c in 0..m {
                    acc[c] += diff[c] * inv;
                }
            }
        }
        for v in acc.iter_mut() {
            *v *= inv_n;
        }
    });
    out
}

/// `(Σ R Rᵀ, Σ ‖R‖²)`.
fn second_moments(ranks: &[f64], m: usize) -> (DMatrix<f64>, f64) {
    let mut outer = DMatrix::zeros(m, m);
    let mut sum_sq = 0.0;
    for r in ranks.chunks(m) {
        for a in 0..m {
            sum_sq += r[a] * r[a];
            for b in 0..m {
                outer[(a, b)] += r[a] * r[b];
            }
        }
    }
    (outer, sum_sq)
}

fn all_rows_equal(scores: &DMatrix<f64>) -> bool {
    let first = scores.row(0);
    scores.row_iter().all(|r| r == first)
}

/// Multivariate ranks of `scores` (`n × M`) under the transformation `A`.
pub fn multivariate_ranks(scores: &DMatrix<f64>, transform: &DMatrix<f64>) -> Result<RankSet> {
    let (n, m) = scores.shape();
    if transform.shape() != (m, m) {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: transform.nrows(),
        });
    }
    let y = transformed_rows(scores, transform);
    let raw = rank_rows(&y, n, m);
    let (outer, sum_sq) = second_moments(&raw, m);
    let residual = sphericity_residual(&outer, sum_sq, n, m);
    Ok(RankSet {
        ranks: DMatrix::from_row_slice(n, m, &raw),
        transform: transform.clone(),
        sphericity_residual: residual,
        sum_sq,
        iterations: 0,
    })
}

fn sphericity_residual(outer: &DMatrix<f64>, sum_sq: f64, n: usize, m: usize) -> f64 {
    let n = n as f64;
    let lhs = outer * (m as f64 / n);
    let rhs = DMatrix::<f64>::identity(m, m) * (sum_sq / n);
    (lhs - rhs).norm()
}

/// Symmetric inverse square root with eigenvalues floored at
/// `1e-12 · λ_max`.
fn inv_sqrt_spd(s: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = s.clone().symmetric_eigen();
    let lmax = eig.eigenvalues.max().max(f64::MIN_POSITIVE);
    let floor = 1e-12 * lmax;
    let d = eig.eigenvalues.map(|l| 1.0 / l.max(floor).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

fn normalise_det(a: &mut DMatrix<f64>) {
    let m = a.nrows() as f64;
    let det = a.determinant();
    if det > 0.0 && det.is_finite() {
        *a /= det.powf(1.0 / m);
    }
}

/// Finds `A` (unit determinant) making the ranks spherical and returns the
/// ranks computed with it.
///
/// Iterates `A ← S^{-1/2} A` with `S = M Σ R Rᵀ / Σ ‖R‖²` until
/// `‖S − I‖_F < tol`.
pub fn tyler_ranks(scores: &DMatrix<f64>, opts: TylerOptions) -> Result<RankSet> {
    let (n, m) = scores.shape();
    if n == 0 || m == 0 {
        return Err(Error::DegenerateScores);
    }
    if all_rows_equal(scores) {
        return Err(Error::DegenerateScores);
    }
    let mut a = DMatrix::<f64>::identity(m, m);
    let mut last_residual = f64::INFINITY;
    for iter in 0..=opts.max_iter {
        let y = transformed_rows(scores, &a);
        let raw = rank_rows(&y, n, m);
        let (outer, sum_sq) = second_moments(&raw, m);
        if sum_sq == 0.0 {
            return Err(Error::DegenerateScores);
        }
        let s = &outer * (m as f64 / sum_sq);
        let dev = (&s - DMatrix::<f64>::identity(m, m)).norm();
        last_residual = dev;
        if dev < opts.tol {
            return Ok(RankSet {
                ranks: DMatrix::from_row_slice(n, m, &raw),
                transform: a,
                sphericity_residual: sphericity_residual(&outer, sum_sq, n, m),
                sum_sq,
                iterations: iter,
            });
        }
        if iter == opts.max_iter {
            break;
        }
        a = inv_sqrt_spd(&s) * a;
        normalise_det(&mut a);
    }
    Err(Error::TylerNonconvergence {
        max_iter: opts.max_iter,
        residual: last_residual,
    })
}

/// The converged transformation alone.
pub fn tyler_transform(scores: &DMatrix<f64>, tol: f64, max_iter: usize) -> Result<DMatrix<f64>> {
    tyler_ranks(scores, TylerOptions { tol, max_iter }).map(|r| r.transform)
}
