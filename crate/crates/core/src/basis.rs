//! Finite function bases on `[0, T]` and their exact integration over
//! sub-intervals.
//!
//! Integrals are computed with Gauss–Legendre quadrature on pieces split at
//! the knots, so for B-splines every integrand (`φ_l` or `φ_l φ_l'`) is a
//! polynomial on each piece and the rule is exact up to rounding.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    #[default]
    Bspline,
    Fourier,
}

impl std::str::FromStr for BasisKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bspline" | "b-spline" | "spline" => Ok(BasisKind::Bspline),
            "fourier" => Ok(BasisKind::Fourier),
            other => Err(Error::InvalidBasisSpec(format!("unknown basis kind `{other}`"))),
        }
    }
}

/// Basis choice as it appears in run configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BasisSpec {
    pub kind: BasisKind,
    pub size: usize,
    pub degree: usize,
}

impl Default for BasisSpec {
    fn default() -> Self {
        Self {
            kind: BasisKind::Bspline,
            size: 10,
            degree: 3,
        }
    }
}

impl BasisSpec {
    pub fn bspline(size: usize, degree: usize) -> Self {
        Self {
            kind: BasisKind::Bspline,
            size,
            degree,
        }
    }

    pub fn fourier(size: usize) -> Self {
        Self {
            kind: BasisKind::Fourier,
            size,
            degree: 0,
        }
    }

    pub fn build(&self, horizon: f64) -> Result<Basis> {
        make_basis(self.kind, self.size, self.degree, horizon)
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub(crate) struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub(crate) fn new(order: usize) -> Self {
        let n = order.max(1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Newton iteration on P_n from the Chebyshev-like initial guess.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// `(node, weight)` pairs mapped onto `[a, b]`.
    pub(crate) fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let n = n as f64;
    let dp = n * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

#[derive(Debug, Clone)]
pub struct Basis {
    spec: BasisSpec,
    horizon: f64,
    /// Full clamped knot vector (B-splines only).
    knots: Vec<f64>,
    /// Sorted distinct points where the integrand may lose smoothness.
    breakpoints: Vec<f64>,
    rule: GaussLegendre,
}

/// Builds a basis of `size` functions on `[0, horizon]`. B-splines use a
/// clamped knot vector with `size - degree - 1` uniform interior knots.
pub fn make_basis(kind: BasisKind, size: usize, degree: usize, horizon: f64) -> Result<Basis> {
    if size == 0 {
        return Err(Error::InvalidBasisSpec("basis size must be at least 1".into()));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidBasisSpec(format!("domain [0, {horizon}] is empty")));
    }
    let spec = BasisSpec { kind, size, degree };
    match kind {
        BasisKind::Bspline => {
            if size < degree + 1 {
                return Err(Error::InvalidBasisSpec(format!(
                    "a degree-{degree} B-spline basis needs at least {} functions, got {size}",
                    degree + 1
                )));
            }
            let interior = size - degree - 1;
            let mut knots = Vec::with_capacity(size + degree + 1);
            knots.extend(std::iter::repeat_n(0.0, degree + 1));
            let step = horizon / (interior + 1) as f64;
            knots.extend((1..=interior).map(|i| i as f64 * step));
            knots.extend(std::iter::repeat_n(horizon, degree + 1));
            let mut breakpoints: Vec<f64> = knots.clone();
            breakpoints.dedup();
            Ok(Basis {
                spec,
                horizon,
                knots,
                breakpoints,
                rule: GaussLegendre::new((degree + 2).max(6)),
            })
        }
        BasisKind::Fourier => {
            let pieces = 2 * size;
            let breakpoints = (0..=pieces)
                .map(|i| horizon * i as f64 / pieces as f64)
                .collect();
            Ok(Basis {
                spec: BasisSpec { degree: 0, ..spec },
                horizon,
                knots: Vec::new(),
                breakpoints,
                rule: GaussLegendre::new(12),
            })
        }
    }
}

impl Basis {
    pub fn spec(&self) -> BasisSpec {
        self.spec
    }

    pub fn kind(&self) -> BasisKind {
        self.spec.kind
    }

    pub fn len(&self) -> usize {
        self.spec.size
    }

    pub fn is_empty(&self) -> bool {
        self.spec.size == 0
    }

    pub fn degree(&self) -> usize {
        self.spec.degree
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Interior knots of a B-spline basis.
    pub fn interior_knots(&self) -> &[f64] {
        if self.knots.is_empty() {
            return &[];
        }
        let p = self.spec.degree;
        &self.knots[p + 1..self.knots.len() - p - 1]
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if (0.0..=self.horizon).contains(&t) {
            Ok(())
        } else {
            Err(Error::TimeOutOfDomain {
                t,
                horizon: self.horizon,
            })
        }
    }

    /// All `L` basis values at `t`.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        self.check_time(t)?;
        let mut out = vec![0.0; self.len()];
        let mut local = vec![0.0; self.local_width()];
        let offset = self.eval_local(t, self.span_of(t), &mut local);
        out[offset..offset + local.len()].copy_from_slice(&local);
        Ok(out)
    }

    /// Number of functions that can be nonzero at one point.
    fn local_width(&self) -> usize {
        match self.spec.kind {
            BasisKind::Bspline => self.spec.degree + 1,
            BasisKind::Fourier => self.spec.size,
        }
    }

    /// Knot span containing `t` (B-splines; 0 for Fourier).
    fn span_of(&self, t: f64) -> usize {
        match self.spec.kind {
            BasisKind::Bspline => {
                let p = self.spec.degree;
                let last = self.spec.size - 1;
                if t >= self.horizon {
                    return last;
                }
                let idx = self.knots.partition_point(|&k| k <= t) - 1;
                idx.clamp(p, last)
            }
            BasisKind::Fourier => 0,
        }
    }

    /// Writes the possibly-nonzero values at `t` into `out` and returns the
    /// index of the first one.
    fn eval_local(&self, t: f64, span: usize, out: &mut [f64]) -> usize {
        match self.spec.kind {
            BasisKind::Bspline => {
                let p = self.spec.degree;
                let u = &self.knots;
                let mut left = [0.0f64; 32];
                let mut right = [0.0f64; 32];
                assert!(p < 32, "B-spline degree above 31 is not supported");
                if t >= self.horizon {
                    // clamped end: only the last function is nonzero
                    out.fill(0.0);
                    out[p] = 1.0;
                    return span - p;
                }
                out[0] = 1.0;
                for j in 1..=p {
                    left[j] = t - u[span + 1 - j];
                    right[j] = u[span + j] - t;
                    let mut saved = 0.0;
                    for r in 0..j {
                        let temp = out[r] / (right[r + 1] + left[j - r]);
                        out[r] = saved + right[r + 1] * temp;
                        saved = left[j - r] * temp;
                    }
                    out[j] = saved;
                }
                span - p
            }
            BasisKind::Fourier => {
                let omega = 2.0 * PI * t / self.horizon;
                out[0] = 1.0;
                let mut l = 1;
                let mut freq = 1.0;
                while l < self.spec.size {
                    out[l] = (freq * omega).sin();
                    l += 1;
                    if l < self.spec.size {
                        out[l] = (freq * omega).cos();
                        l += 1;
                    }
                    freq += 1.0;
                }
                0
            }
        }
    }

    /// Adds `∫_a^b φ_l` into `s` and `∫_a^b φ_l φ_l'` into the row-major
    /// `L × L` buffer `q`. Caller guarantees `0 <= a <= b <= T`.
    pub(crate) fn accumulate_interval(&self, a: f64, b: f64, s: &mut [f64], q: &mut [f64]) {
        let l_total = self.len();
        debug_assert_eq!(s.len(), l_total);
        debug_assert_eq!(q.len(), l_total * l_total);
        if b <= a {
            return;
        }
        let width = self.local_width();
        let mut local = [0.0f64; 64];
        let mut heap;
        let vals: &mut [f64] = if width <= local.len() {
            &mut local[..width]
        } else {
            heap = vec![0.0; width];
            &mut heap
        };

        let start = self.breakpoints.partition_point(|&k| k <= a);
        let end = self.breakpoints.partition_point(|&k| k < b);
        let inner = &self.breakpoints[start..end.max(start)];
        let mut lo = a;
        for &hi in inner.iter().chain(std::iter::once(&b)) {
            if hi <= lo {
                continue;
            }
            let span = self.span_of(0.5 * (lo + hi));
            for (t, w) in self.rule.on(lo, hi) {
                let off = self.eval_local(t, span, vals);
                for (i, &vi) in vals.iter().enumerate() {
                    let wi = w * vi;
                    s[off + i] += wi;
                    let row = (off + i) * l_total + off;
                    for (qj, &vj) in q[row..row + width].iter_mut().zip(vals.iter()) {
                        *qj += wi * vj;
                    }
                }
            }
            lo = hi;
        }
    }

    /// `(s, Q)` with `s_l = ∫_a^b φ_l` and `Q_{ll'} = ∫_a^b φ_l φ_l'`.
    pub fn integrate_on_interval(&self, a: f64, b: f64) -> Result<(DVector<f64>, DMatrix<f64>)> {
        self.check_time(a)?;
        self.check_time(b)?;
        if b < a {
            return Err(Error::TimeOutOfDomain { t: a, horizon: b });
        }
        let l = self.len();
        let mut s = vec![0.0; l];
        let mut q = vec![0.0; l * l];
        self.accumulate_interval(a, b, &mut s, &mut q);
        Ok((DVector::from_vec(s), DMatrix::from_row_slice(l, l, &q)))
    }
}
