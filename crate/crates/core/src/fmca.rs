//! Functional multiple correspondence analysis.
//!
//! Each trajectory `X_i` is summarised by the row
//! `V_i[(j, l)] = ∫ 1{X_i(t) = e_j} φ_l(t) dt`. With encoding functions
//! `a_j = Σ_l α_{jl} φ_l`, the score of individual `i` is `α · V_i`, and the
//! eigen-equation on the encoding functions becomes the generalized symmetric
//! problem `F α = λ G α` with
//!
//! * `F` the empirical covariance of the rows `V_i`,
//! * `G` block-diagonal, block `j` = `(1/n) Σ_i ∫ 1{X_i(t) = e_j} φ_l φ_l' dt`.
//!
//! Centering `V` removes the trivial pair (`a_j ≡ 1`, eigenvalue `T`).

use log::warn;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;

use crate::basis::Basis;
use crate::error::{Error, Result};
use crate::trajectory::{SpatialDataset, StatePath};

/// Relative cut (times `T`) below which a `G` diagonal entry is pruned.
pub const PRUNE_TOL: f64 = 1e-12;
/// Relative cut (times `T`) below which eigenvalues count as zero.
pub const EIGEN_TOL: f64 = 1e-12;
pub const DEFAULT_VARIANCE_THRESHOLD: f64 = 0.9;

#[derive(Debug, Clone)]
pub struct DesignMatrices {
    n_states: usize,
    basis_len: usize,
    horizon: f64,
    v: DMatrix<f64>,
    g: DMatrix<f64>,
    mean_v: DVector<f64>,
    location_of: Vec<usize>,
}

impl DesignMatrices {
    /// `n × (J·L)`; column `j * L + l`.
    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn mean_v(&self) -> &DVector<f64> {
        &self.mean_v
    }

    pub fn n_individuals(&self) -> usize {
        self.v.nrows()
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn basis_len(&self) -> usize {
        self.basis_len
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn location_of(&self) -> &[usize] {
        &self.location_of
    }

    pub fn column(&self, state: usize, basis_fn: usize) -> usize {
        state * self.basis_len + basis_fn
    }

    /// Empirical covariance `F = (1/n) Σ (V_i − mean)(V_i − mean)ᵀ`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let centered = self.centered();
        let n = self.v.nrows() as f64;
        centered.tr_mul(&centered) / n
    }

    pub fn centered(&self) -> DMatrix<f64> {
        let mut c = self.v.clone();
        for mut row in c.row_iter_mut() {
            row -= self.mean_v.transpose();
        }
        c
    }
}

/// Row `V_i` plus the per-state Gram blocks of one path.
struct PathContribution {
    row: Vec<f64>,
    /// `J` row-major `L × L` blocks.
    gram: Vec<f64>,
}

fn path_contribution(path: &StatePath, basis: &Basis, n_states: usize) -> PathContribution {
    let l = basis.len();
    let mut row = vec![0.0; n_states * l];
    let mut gram = vec![0.0; n_states * l * l];
    for (a, b, state) in path.intervals() {
        basis.accumulate_interval(
            a,
            b,
            &mut row[state * l..(state + 1) * l],
            &mut gram[state * l * l..(state + 1) * l * l],
        );
    }
    PathContribution { row, gram }
}

/// `V` row of a single path, e.g. to project a new individual.
pub fn design_row(path: &StatePath, basis: &Basis, n_states: usize) -> Result<DVector<f64>> {
    if path.horizon() != basis.horizon() {
        return Err(Error::MismatchedHorizon {
            expected: basis.horizon(),
            found: path.horizon(),
        });
    }
    if path.max_state() >= n_states {
        return Err(Error::invalid_path(format!(
            "state {} out of range for {n_states} states",
            path.max_state()
        )));
    }
    Ok(DVector::from_vec(path_contribution(path, basis, n_states).row))
}

pub fn build_design(dataset: &SpatialDataset, basis: &Basis) -> Result<DesignMatrices> {
    if dataset.horizon() != basis.horizon() {
        return Err(Error::MismatchedHorizon {
            expected: dataset.horizon(),
            found: basis.horizon(),
        });
    }
    let j = dataset.n_states();
    let l = basis.len();
    let width = j * l;
    let paths: Vec<&StatePath> = dataset.paths().collect();
    let n = paths.len();

    let parts: Vec<PathContribution> = paths
        .par_iter()
        .map(|p| path_contribution(p, basis, j))
        .collect();

    let mut v = DMatrix::zeros(n, width);
    let mut gram = vec![0.0; j * l * l];
    // sequential fold keeps the summation order fixed
    for (i, part) in parts.iter().enumerate() {
        for (c, &x) in part.row.iter().enumerate() {
            v[(i, c)] = x;
        }
        for (acc, &x) in gram.iter_mut().zip(&part.gram) {
            *acc += x;
        }
    }

    let inv_n = 1.0 / n as f64;
    let mut g = DMatrix::zeros(width, width);
    for s in 0..j {
        for r in 0..l {
            for c in 0..l {
                let val = 0.5 * (gram[s * l * l + r * l + c] + gram[s * l * l + c * l + r]);
                g[(s * l + r, s * l + c)] = val * inv_n;
            }
        }
    }
    let mean_v = v.row_mean().transpose();

    Ok(DesignMatrices {
        n_states: j,
        basis_len: l,
        horizon: dataset.horizon(),
        v,
        g,
        mean_v,
        location_of: dataset.location_of_individuals(),
    })
}

#[derive(Debug, Clone)]
pub struct Encoding {
    /// Non-trivial eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// `(J·L) × M_max`; column `m` holds `α^(m)`. Pruned rows are zero.
    pub coefficients: DMatrix<f64>,
    /// `n × M` scores of the training individuals.
    pub scores: DMatrix<f64>,
    /// Retained dimension.
    pub m: usize,
    /// Cumulative explained-variance fractions, one per eigenvalue.
    pub explained: Vec<f64>,
    /// Design columns dropped before factorisation.
    pub pruned_columns: Vec<usize>,
    /// Ridge added to `G` when the pruned matrix was not positive definite.
    pub ridge: Option<f64>,
}

impl Encoding {
    pub fn retained_eigenvalues(&self) -> &[f64] {
        &self.eigenvalues[..self.m]
    }

    /// Coefficients of the retained components, `(J·L) × M`.
    pub fn retained_coefficients(&self) -> DMatrix<f64> {
        self.coefficients.columns(0, self.m).into_owned()
    }
}

fn select(matrix: &DMatrix<f64>, keep: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(keep.len(), keep.len(), |r, c| matrix[(keep[r], keep[c])])
}

/// Solves `F α = λ G α` through the Cholesky factor of `G` and returns the
/// scores of the components explaining at least `variance_threshold` of the
/// total variance.
pub fn solve_fmca(design: &DesignMatrices, variance_threshold: f64) -> Result<Encoding> {
    if !(variance_threshold > 0.0 && variance_threshold <= 1.0) {
        return Err(Error::Config(format!(
            "variance threshold {variance_threshold} must lie in (0, 1]"
        )));
    }
    let horizon = design.horizon;
    let width = design.g.nrows();

    let keep: Vec<usize> = (0..width)
        .filter(|&c| design.g[(c, c)] >= PRUNE_TOL * horizon)
        .collect();
    let pruned_columns: Vec<usize> = (0..width).filter(|c| !keep.contains(c)).collect();
    if keep.is_empty() {
        return Err(Error::SingularDesign);
    }

    let f = select(&design.covariance(), &keep);
    let mut g = select(&design.g, &keep);

    let mut ridge = None;
    let chol = match Cholesky::new(g.clone()) {
        Some(c) => c,
        None => {
            let eps = 1e-10 * design.g.trace() / width as f64;
            warn!("G is not positive definite after pruning; adding ridge {eps:.3e}");
            for i in 0..g.nrows() {
                g[(i, i)] += eps;
            }
            ridge = Some(eps);
            Cholesky::new(g.clone()).ok_or(Error::SingularDesign)?
        }
    };

    let reduced = whiten(&chol, &f);
    let eig = reduced.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let lambda_max = eig.eigenvalues[order[0]];
    if lambda_max <= EIGEN_TOL * horizon {
        return Err(Error::NoVariation);
    }
    let cut = (EIGEN_TOL * horizon).max(1e-9 * lambda_max);
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&i| eig.eigenvalues[i] > cut)
        .collect();
    let m_max = kept.len();

    let l_factor = chol.l();
    let mut coefficients = DMatrix::zeros(width, m_max);
    let mut eigenvalues = Vec::with_capacity(m_max);
    for (m, &idx) in kept.iter().enumerate() {
        eigenvalues.push(eig.eigenvalues[idx]);
        // α = L⁻ᵀ y, so that αᵀ G α = yᵀ y = 1
        let y = eig.eigenvectors.column(idx).into_owned();
        let mut alpha = l_factor
            .tr_solve_lower_triangular(&y)
            .expect("Cholesky factor has a positive diagonal");
        orient(&mut alpha);
        for (r, &c) in keep.iter().enumerate() {
            coefficients[(c, m)] = alpha[r];
        }
    }

    let total: f64 = eigenvalues.iter().sum();
    let mut explained = Vec::with_capacity(m_max);
    let mut acc = 0.0;
    for &lam in &eigenvalues {
        acc += lam;
        explained.push(acc / total);
    }
    if let Some(last) = explained.last_mut() {
        *last = 1.0;
    }
    let m = explained
        .iter()
        .position(|&frac| frac >= variance_threshold - 1e-12)
        .map_or(m_max, |p| p + 1);

    let scores = design.centered() * coefficients.columns(0, m);

    Ok(Encoding {
        eigenvalues,
        coefficients,
        scores,
        m,
        explained,
        pruned_columns,
        ridge,
    })
}

/// `L⁻¹ F L⁻ᵀ` for `G = L Lᵀ`, symmetrised.
fn whiten(chol: &Cholesky<f64, Dyn>, f: &DMatrix<f64>) -> DMatrix<f64> {
    let l = chol.l();
    let left = l
        .solve_lower_triangular(f)
        .expect("Cholesky factor has a positive diagonal");
    let both = l
        .solve_lower_triangular(&left.transpose())
        .expect("Cholesky factor has a positive diagonal");
    (&both + both.transpose()) * 0.5
}

/// Flips `v` so that its entry of largest magnitude is positive. Near-ties
/// resolve to the lowest index.
fn orient(v: &mut DVector<f64>) {
    let amax = v.amax();
    if amax == 0.0 {
        return;
    }
    let lead = v
        .iter()
        .position(|x| x.abs() >= amax * (1.0 - 1e-9))
        .expect("amax is attained");
    if v[lead] < 0.0 {
        v.neg_mut();
    }
}

/// Projects new design rows (`k × (J·L)`) onto the retained components.
pub fn encode_scores(design: &DesignMatrices, encoding: &Encoding, rows: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let width = design.mean_v.len();
    if rows.ncols() != width {
        return Err(Error::DimensionMismatch {
            expected: width,
            found: rows.ncols(),
        });
    }
    let mut centered = rows.clone();
    for mut row in centered.row_iter_mut() {
        row -= design.mean_v.transpose();
    }
    Ok(centered * encoding.coefficients.columns(0, encoding.m))
}
