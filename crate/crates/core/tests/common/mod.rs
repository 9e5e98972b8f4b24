//! Generators and independent reference computations shared by the
//! integration tests.
#![allow(dead_code)]

use cfss::nalgebra::{DMatrix, DVector, SymmetricEigen};
use cfss::{Individual, Location, SpatialDataset, StatePath, StateSpace};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn random_path<R: Rng>(rng: &mut R, n_states: usize, horizon: f64, max_jumps: usize) -> StatePath {
    let jumps = rng.gen_range(0..=max_jumps);
    let mut times: Vec<f64> = (0..jumps).map(|_| rng.gen_range(0.0..horizon)).collect();
    times.sort_by(f64::total_cmp);
    let mut state = rng.gen_range(0..n_states);
    let mut segments = vec![(0.0, state)];
    for t in times {
        if n_states > 1 {
            let mut next = rng.gen_range(0..n_states - 1);
            if next >= state {
                next += 1;
            }
            state = next;
        }
        segments.push((t, state));
    }
    StatePath::new(segments, horizon).unwrap()
}

pub fn random_locations<R: Rng>(rng: &mut R, k: usize) -> Vec<Location> {
    (0..k)
        .map(|i| Location::new(format!("L{i}"), rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0)))
        .collect()
}

/// `n` individuals spread over `k` locations, every location non-empty
/// when `n >= k`.
pub fn random_dataset<R: Rng>(rng: &mut R, k: usize, n: usize, n_states: usize, horizon: f64) -> SpatialDataset {
    let locations = random_locations(rng, k);
    let mut groups: Vec<Vec<Individual>> = vec![Vec::new(); k];
    let mut slots: Vec<usize> = (0..n).map(|i| if i < k { i } else { rng.gen_range(0..k) }).collect();
    slots.shuffle(rng);
    for (i, loc) in slots.into_iter().enumerate() {
        groups[loc].push(Individual::new(format!("p{i}"), random_path(rng, n_states, horizon, 6)));
    }
    let labels: Vec<String> = (0..n_states).map(|j| format!("s{j}")).collect();
    SpatialDataset::new(StateSpace::new(labels).unwrap(), horizon, locations, groups).unwrap()
}

/// Exact integrals for the two linear B-splines on `[0, T]`,
/// `φ1 = 1 − t/T` and `φ2 = t/T`, over `[a, b]`: returns
/// `(∫φ, ∫φφᵀ)`.
fn hat_integrals(a: f64, b: f64, t: f64) -> ([f64; 2], [[f64; 2]; 2]) {
    let d1 = b - a;
    let d2 = (b * b - a * a) / 2.0;
    let d3 = (b * b * b - a * a * a) / 3.0;
    let p2 = d2 / t;
    let p1 = d1 - p2;
    let q22 = d3 / (t * t);
    let q12 = p2 - q22;
    let q11 = d1 - 2.0 * p2 + q22;
    ([p1, p2], [[q11, q12], [q12, q22]])
}

/// Non-trivial FMCA eigenvalues from the symmetric reduction
/// `G^{-1/2} F G^{-1/2}`, with `V` and `G` integrated in closed form.
/// `linear` selects the two-hat basis, otherwise the constant basis.
pub fn oracle_eigenvalues(dataset: &SpatialDataset, linear: bool) -> Vec<f64> {
    let j = dataset.n_states();
    let t = dataset.horizon();
    let l = if linear { 2 } else { 1 };
    let n = dataset.n_individuals();
    let mut v = DMatrix::<f64>::zeros(n, j * l);
    let mut g = DMatrix::<f64>::zeros(j * l, j * l);
    for (i, path) in dataset.paths().enumerate() {
        for (a, b, s) in path.intervals() {
            if linear {
                let (p, q) = hat_integrals(a, b, t);
                for x in 0..2 {
                    v[(i, s * 2 + x)] += p[x];
                    for y in 0..2 {
                        g[(s * 2 + x, s * 2 + y)] += q[x][y] / n as f64;
                    }
                }
            } else {
                v[(i, s)] += b - a;
                g[(s, s)] += (b - a) / n as f64;
            }
        }
    }
    let mean: DVector<f64> = v.row_mean().transpose();
    let mut c = v.clone();
    for mut row in c.row_iter_mut() {
        row -= mean.transpose();
    }
    let f = c.transpose() * &c / n as f64;

    let keep: Vec<usize> = (0..j * l).filter(|&x| g[(x, x)] >= 1e-12 * t).collect();
    let f = DMatrix::from_fn(keep.len(), keep.len(), |r, q| f[(keep[r], keep[q])]);
    let g = DMatrix::from_fn(keep.len(), keep.len(), |r, q| g[(keep[r], keep[q])]);
    let ge = SymmetricEigen::new(g);
    let inv_sqrt = &ge.eigenvectors
        * DMatrix::from_diagonal(&ge.eigenvalues.map(|x| 1.0 / x.sqrt()))
        * ge.eigenvectors.transpose();
    let reduced = &inv_sqrt * f * &inv_sqrt;
    let reduced = (&reduced + reduced.transpose()) * 0.5;
    let mut eig: Vec<f64> = SymmetricEigen::new(reduced).eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    let cut = (1e-12 * t).max(1e-9 * eig[0]);
    eig.into_iter().filter(|&x| x > cut).collect()
}

/// Random scan problem with `K ≤ 10`, `n ≤ 30` and `M ≤ 3`.
pub struct ScanInstance {
    pub locations: Vec<Location>,
    pub counts: Vec<usize>,
    pub location_of: Vec<usize>,
    pub scores: DMatrix<f64>,
}

pub fn scan_instance<R: Rng>(rng: &mut R) -> ScanInstance {
    let k = rng.gen_range(2..=10);
    let n = rng.gen_range(k.max(4)..=30);
    let m = rng.gen_range(1..=3);
    let mut locations = random_locations(rng, k);
    if rng.gen_bool(0.3) {
        // lattice coordinates create equidistant ties
        for l in &mut locations {
            l.x = l.x.round();
            l.y = l.y.round();
        }
        locations.dedup_by(|a, b| a.x == b.x && a.y == b.y);
    }
    let k = locations.len();
    let location_of: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
    let mut counts = vec![0; k];
    for &l in &location_of {
        counts[l] += 1;
    }
    let scores = DMatrix::from_fn(n, m, |_, _| rng.gen_range(-3.0..3.0));
    ScanInstance {
        locations,
        counts,
        location_of,
        scores,
    }
}

/// Max of `W` over every admissible disc, with each statistic computed from
/// its definition through group means.
pub fn brute_force_lambda(locations: &[Location], location_of: &[usize], ranks: &DMatrix<f64>) -> f64 {
    let n = ranks.nrows();
    let m = ranks.ncols();
    let sum_sq: f64 = ranks.iter().map(|x| x * x).sum();
    let mut best = f64::NEG_INFINITY;
    for c in locations {
        for through in locations {
            let r = c.distance(through);
            let inside: Vec<bool> = locations.iter().map(|l| c.distance(l) <= r).collect();
            let members: Vec<usize> = (0..n).filter(|&i| inside[location_of[i]]).collect();
            let nw = members.len();
            if nw == 0 || 2 * nw > n {
                continue;
            }
            let mut mean_w = vec![0.0; m];
            let mut mean_c = vec![0.0; m];
            for i in 0..n {
                let target = if inside[location_of[i]] { &mut mean_w } else { &mut mean_c };
                for d in 0..m {
                    target[d] += ranks[(i, d)];
                }
            }
            let nc = (n - nw) as f64;
            let norm_w: f64 = mean_w.iter().map(|x| (x / nw as f64).powi(2)).sum();
            let norm_c: f64 = mean_c.iter().map(|x| (x / nc).powi(2)).sum();
            let w = (m * n) as f64 / sum_sq * (nw as f64 * norm_w + nc * norm_c);
            best = best.max(w);
        }
    }
    best
}

/// One-dimensional ranks `(#{z_j < z_i} − #{z_j > z_i}) / n`.
pub fn one_d_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    values
        .iter()
        .map(|&x| {
            let less = values.iter().filter(|&&y| y < x).count() as f64;
            let more = values.iter().filter(|&&y| y > x).count() as f64;
            (less - more) / n
        })
        .collect()
}

/// `‖(M/n) Σ R Rᵀ − (1/n) Σ RᵀR · I‖_F`, the unnormalised sphericity gap.
pub fn sphericity_gap(ranks: &DMatrix<f64>) -> (f64, f64) {
    let n = ranks.nrows() as f64;
    let m = ranks.ncols();
    let sum_sq: f64 = ranks.iter().map(|x| x * x).sum();
    let gap = ranks.transpose() * ranks * (m as f64 / n) - DMatrix::identity(m, m) * (sum_sq / n);
    (gap.norm(), sum_sq)
}

/// Worst-case encoding diagnostics of one dataset: `|mean| / √λ1`, the
/// relative off-diagonal covariance, the relative diagonal error, and
/// `max λ / T`.
#[derive(Debug, Clone, Copy, Default)]
pub struct EncodingCheck {
    pub mean_ratio: f64,
    pub offdiag_rel: f64,
    pub diag_rel: f64,
    pub lambda_over_t: f64,
}

pub fn check_encoding(scores: &DMatrix<f64>, eigenvalues: &[f64], horizon: f64) -> EncodingCheck {
    let n = scores.nrows() as f64;
    let m = scores.ncols();
    let sqrt_l1 = eigenvalues[0].sqrt();
    let means: Vec<f64> = (0..m).map(|c| scores.column(c).sum() / n).collect();
    let mean_ratio = means.iter().map(|x| x.abs()).fold(0.0, f64::max) / sqrt_l1;
    let cov = DMatrix::from_fn(m, m, |a, b| {
        (0..scores.nrows())
            .map(|i| (scores[(i, a)] - means[a]) * (scores[(i, b)] - means[b]))
            .sum::<f64>()
            / n
    });
    let mut offdiag_rel: f64 = 0.0;
    let mut diag_rel: f64 = 0.0;
    for a in 0..m {
        diag_rel = diag_rel.max((cov[(a, a)] - eigenvalues[a]).abs() / eigenvalues[a]);
        for b in 0..m {
            if a != b {
                offdiag_rel = offdiag_rel.max(cov[(a, b)].abs() / (eigenvalues[a] * eigenvalues[b]).sqrt());
            }
        }
    }
    EncodingCheck {
        mean_ratio,
        offdiag_rel,
        diag_rel,
        lambda_over_t: eigenvalues[0] / horizon,
    }
}
