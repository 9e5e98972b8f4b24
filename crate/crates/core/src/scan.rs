//! Circular scanning windows, the rank-based concentration index and its
//! permutation null distribution.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::BasisSpec;
use crate::error::{Error, Result};
use crate::fmca::{self, DesignMatrices, Encoding};
use crate::rank::{self, RankSet, TylerOptions};
use crate::trajectory::{Location, SpatialDataset};

/// Closed disc centred on one location and passing through another.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub center: usize,
    pub through: usize,
    pub radius: f64,
    /// Sorted location indices.
    pub members: Vec<usize>,
    pub n_individuals: usize,
}

impl Window {
    pub fn contains(&self, location: usize) -> bool {
        self.members.binary_search(&location).is_ok()
    }
}

#[derive(Debug, Clone)]
struct CenterPlan {
    /// Locations sorted by distance from the centre.
    order: Vec<usize>,
    /// `(prefix length, window index)`, ascending.
    stops: Vec<(usize, usize)>,
}

/// Candidate windows plus the per-centre prefix layout used for fast
/// evaluation.
#[derive(Debug, Clone)]
pub struct WindowSet {
    windows: Vec<Window>,
    plans: Vec<CenterPlan>,
    n_locations: usize,
    n_individuals: usize,
}

impl WindowSet {
    pub fn windows(&self) -> &[Window] {
        &self.windows
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn n_locations(&self) -> usize {
        self.n_locations
    }

    pub fn n_individuals(&self) -> usize {
        self.n_individuals
    }
}

/// All discs `w_{k,k'}` (including radius 0) holding between 1 and `n/2`
/// individuals, deduplicated by member set. Order: centre ascending, radius
/// ascending.
pub fn enumerate_windows(locations: &[Location], counts: &[usize]) -> WindowSet {
    let k = locations.len();
    assert_eq!(k, counts.len(), "one count per location");
    let n: usize = counts.iter().sum();
    let max_size = n as f64 / 2.0;

    struct Candidate {
        center: usize,
        through: usize,
        radius: f64,
        prefix: usize,
        members: Vec<usize>,
        size: usize,
    }

    let mut orders = Vec::with_capacity(k);
    let mut candidates = Vec::new();
    for c in 0..k {
        let dist: Vec<f64> = locations.iter().map(|l| locations[c].distance(l)).collect();
        let mut order: Vec<usize> = (0..k).collect();
        // centre first even if another location shares its coordinates
        order.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then((a != c).cmp(&(b != c))).then(a.cmp(&b)));
        let mut size = 0usize;
        let mut i = 0;
        while i < k {
            let radius = dist[order[i]];
            let through = order[i];
            let mut j = i;
            while j < k && dist[order[j]] <= radius {
                size += counts[order[j]];
                j += 1;
            }
            if size as f64 > max_size {
                break;
            }
            if size >= 1 {
                let mut members = order[..j].to_vec();
                members.sort_unstable();
                candidates.push(Candidate {
                    center: c,
                    through,
                    radius,
                    prefix: j,
                    members,
                    size,
                });
            }
            i = j;
        }
        orders.push(order);
    }

    // smallest radius wins among duplicates, then lowest centre
    let mut best: HashMap<&[usize], usize> = HashMap::new();
    for (idx, cand) in candidates.iter().enumerate() {
        best.entry(cand.members.as_slice())
            .and_modify(|cur| {
                let other = &candidates[*cur];
                if (cand.radius, cand.center) < (other.radius, other.center) {
                    *cur = idx;
                }
            })
            .or_insert(idx);
    }
    let mut kept: Vec<usize> = best.into_values().collect();
    kept.sort_by(|&a, &b| {
        let (x, y) = (&candidates[a], &candidates[b]);
        x.center.cmp(&y.center).then(x.radius.total_cmp(&y.radius))
    });

    let mut plans: Vec<CenterPlan> = orders
        .into_iter()
        .map(|order| CenterPlan { order, stops: Vec::new() })
        .collect();
    let mut windows = Vec::with_capacity(kept.len());
    let mut candidates: Vec<Option<Candidate>> = candidates.into_iter().map(Some).collect();
    for idx in kept {
        let cand = candidates[idx].take().expect("each candidate kept once");
        plans[cand.center].stops.push((cand.prefix, windows.len()));
        windows.push(Window {
            center: cand.center,
            through: cand.through,
            radius: cand.radius,
            members: cand.members,
            n_individuals: cand.size,
        });
    }
    plans.retain(|p| !p.stops.is_empty());

    WindowSet {
        windows,
        plans,
        n_locations: k,
        n_individuals: n,
    }
}

/// `W = (M n / Σ‖R‖²) (|w| ‖R̄_w‖² + |wᶜ| ‖R̄_wᶜ‖²)` from the rank sums of
/// the two groups.
fn statistic_from_sums(inside: &[f64], outside: &[f64], n_in: usize, n_out: usize, scale: f64) -> f64 {
    let mut acc = 0.0;
    if n_in > 0 {
        acc += inside.iter().map(|x| x * x).sum::<f64>() / n_in as f64;
    }
    if n_out > 0 {
        acc += outside.iter().map(|x| x * x).sum::<f64>() / n_out as f64;
    }
    scale * acc
}

fn scale_factor(ranks: &RankSet) -> Result<f64> {
    if ranks.sum_sq <= 0.0 {
        return Err(Error::DegenerateRanks);
    }
    Ok(ranks.dim() as f64 * ranks.n() as f64 / ranks.sum_sq)
}

/// Direct evaluation of `W` for one window: sums the ranks of individuals
/// located inside and outside.
pub fn window_statistic(ranks: &RankSet, window: &Window, location_of: &[usize]) -> Result<f64> {
    if location_of.len() != ranks.n() {
        return Err(Error::DimensionMismatch {
            expected: ranks.n(),
            found: location_of.len(),
        });
    }
    let scale = scale_factor(ranks)?;
    let m = ranks.dim();
    let mut inside = vec![0.0; m];
    let mut outside = vec![0.0; m];
    let mut n_in = 0;
    for (i, &loc) in location_of.iter().enumerate() {
        let target = if window.contains(loc) {
            n_in += 1;
            &mut inside
        } else {
            &mut outside
        };
        for (c, t) in target.iter_mut().enumerate() {
            *t += ranks.ranks[(i, c)];
        }
    }
    Ok(statistic_from_sums(&inside, &outside, n_in, ranks.n() - n_in, scale))
}

/// Evaluates every window from per-location rank sums using prefix sums
/// along each centre's distance order.
pub struct ScanEvaluator<'a> {
    windows: &'a WindowSet,
    counts: Vec<usize>,
    dim: usize,
    scale: f64,
}

impl<'a> ScanEvaluator<'a> {
    pub fn new(windows: &'a WindowSet, ranks: &RankSet, location_of: &[usize]) -> Result<Self> {
        if location_of.len() != ranks.n() {
            return Err(Error::DimensionMismatch {
                expected: ranks.n(),
                found: location_of.len(),
            });
        }
        let mut counts = vec![0usize; windows.n_locations];
        for &loc in location_of {
            counts[loc] += 1;
        }
        Ok(Self {
            windows,
            counts,
            dim: ranks.dim(),
            scale: scale_factor(ranks)?,
        })
    }

    /// Row-major `K × M` rank sums when individual `i` carries rank row
    /// `assignment[i]`.
    pub fn location_sums(&self, ranks: &DMatrix<f64>, location_of: &[usize], assignment: Option<&[usize]>) -> Vec<f64> {
        let m = self.dim;
        let mut sums = vec![0.0; self.windows.n_locations * m];
        for (i, &loc) in location_of.iter().enumerate() {
            let src = assignment.map_or(i, |a| a[i]);
            for c in 0..m {
                sums[loc * m + c] += ranks[(src, c)];
            }
        }
        sums
    }

    /// `W` for every window, in window order.
    pub fn evaluate(&self, sums: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.windows.len()];
        self.for_each_window(sums, |idx, w| out[idx] = w);
        out
    }

    /// `(index, W)` of the first window attaining the maximum.
    pub fn maximum(&self, sums: &[f64]) -> (usize, f64) {
        let values = self.evaluate(sums);
        let mut best = (0, f64::NEG_INFINITY);
        for (idx, &w) in values.iter().enumerate() {
            if w > best.1 {
                best = (idx, w);
            }
        }
        best
    }

    fn for_each_window(&self, sums: &[f64], mut f: impl FnMut(usize, f64)) {
        let m = self.dim;
        let mut total = vec![0.0; m];
        for chunk in sums.chunks(m) {
            for (t, x) in total.iter_mut().zip(chunk) {
                *t += x;
            }
        }
        let n = self.windows.n_individuals;
        let mut inside = vec![0.0; m];
        let mut outside = vec![0.0; m];
        for plan in &self.windows.plans {
            inside.fill(0.0);
            let mut n_in = 0usize;
            let mut taken = 0usize;
            for &(prefix, idx) in &plan.stops {
                for &loc in &plan.order[taken..prefix] {
                    n_in += self.counts[loc];
                    for c in 0..m {
                        inside[c] += sums[loc * m + c];
                    }
                }
                taken = prefix;
                for c in 0..m {
                    outside[c] = total[c] - inside[c];
                }
                f(idx, statistic_from_sums(&inside, &outside, n_in, n - n_in, self.scale));
            }
        }
    }
}

/// Window with the largest `W`; ties go to the first in enumeration order.
pub fn find_mlc(ranks: &RankSet, windows: &WindowSet, location_of: &[usize]) -> Result<(usize, f64)> {
    if windows.is_empty() {
        return Err(Error::NoCandidateWindows);
    }
    let eval = ScanEvaluator::new(windows, ranks, location_of)?;
    let sums = eval.location_sums(&ranks.ranks, location_of, None);
    Ok(eval.maximum(&sums))
}

/// `(1 + exceedances) / (1 + P)`.
pub fn dwass_pvalue(exceedances: usize, permutations: usize) -> f64 {
    (1 + exceedances) as f64 / (1 + permutations) as f64
}

/// Independent RNG stream for replicate `index` under `seed`.
pub fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone)]
pub struct PermutationOutcome {
    pub p_value: f64,
    pub exceedances: usize,
    /// Scan maximum of every relabelled dataset, in replicate order.
    pub null_statistics: Vec<f64>,
}

/// Random-labelling p-value of the observed scan maximum. Each replicate
/// shuffles the rank rows across individuals with its own seeded stream.
pub fn permutation_pvalue(
    ranks: &RankSet,
    windows: &WindowSet,
    location_of: &[usize],
    permutations: usize,
    seed: u64,
) -> Result<PermutationOutcome> {
    let (_, observed) = find_mlc(ranks, windows, location_of)?;
    permutation_test(ranks, windows, location_of, observed, permutations, seed)
}

pub(crate) fn permutation_test(
    ranks: &RankSet,
    windows: &WindowSet,
    location_of: &[usize],
    observed: f64,
    permutations: usize,
    seed: u64,
) -> Result<PermutationOutcome> {
    let eval = ScanEvaluator::new(windows, ranks, location_of)?;
    let n = ranks.n();
    let null_statistics: Vec<f64> = (0..permutations)
        .into_par_iter()
        .map(|p| {
            let mut rng = replicate_rng(seed, p as u64 + 1);
            let mut assignment: Vec<usize> = (0..n).collect();
            assignment.shuffle(&mut rng);
            let sums = eval.location_sums(&ranks.ranks, location_of, Some(&assignment));
            eval.maximum(&sums).1
        })
        .collect();
    let exceedances = null_statistics.iter().filter(|&&s| s >= observed).count();
    Ok(PermutationOutcome {
        p_value: dwass_pvalue(exceedances, permutations),
        exceedances,
        null_statistics,
    })
}

/// Settings of a full scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanConfig {
    pub basis: BasisSpec,
    pub variance_threshold: f64,
    pub permutations: usize,
    pub seed: u64,
    pub tyler_tol: f64,
    pub tyler_max_iter: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            basis: BasisSpec::default(),
            variance_threshold: fmca::DEFAULT_VARIANCE_THRESHOLD,
            permutations: 999,
            seed: 1,
            tyler_tol: rank::DEFAULT_TOL,
            tyler_max_iter: rank::DEFAULT_MAX_ITER,
        }
    }
}

impl ScanConfig {
    pub fn tyler(&self) -> TylerOptions {
        TylerOptions {
            tol: self.tyler_tol,
            max_iter: self.tyler_max_iter,
        }
    }
}

/// Everything a scan produced, including intermediate diagnostics.
#[derive(Debug, Clone)]
pub struct ScanResult {
    pub lambda: f64,
    pub mlc: Window,
    pub mlc_index: usize,
    pub per_window_w: Vec<f64>,
    pub windows: WindowSet,
    pub p_value: f64,
    pub permutations: usize,
    pub seed: u64,
    pub exceedances: usize,
    pub design: DesignMatrices,
    pub encoding: Encoding,
    pub ranks: RankSet,
    pub location_of: Vec<usize>,
}

impl ScanResult {
    pub fn is_significant(&self, level: f64) -> bool {
        self.p_value <= level
    }
}

/// Encoding, ranking, window scan and permutation inference in sequence.
pub fn run_scan(dataset: &SpatialDataset, config: &ScanConfig) -> Result<ScanResult> {
    if config.permutations == 0 {
        return Err(Error::Config("at least one permutation is required".into()));
    }
    let basis = config.basis.build(dataset.horizon()).map_err(|e| e.at_stage("basis"))?;
    let design = fmca::build_design(dataset, &basis).map_err(|e| e.at_stage("build_design"))?;
    let encoding = fmca::solve_fmca(&design, config.variance_threshold).map_err(|e| e.at_stage("solve_fmca"))?;
    let ranks = rank::tyler_ranks(&encoding.scores, config.tyler()).map_err(|e| e.at_stage("tyler_transform"))?;
    let windows = enumerate_windows(dataset.locations(), &dataset.counts());
    let location_of = dataset.location_of_individuals();

    let eval = ScanEvaluator::new(&windows, &ranks, &location_of).map_err(|e| e.at_stage("window_statistic"))?;
    if windows.is_empty() {
        return Err(Error::NoCandidateWindows.at_stage("find_mlc"));
    }
    let sums = eval.location_sums(&ranks.ranks, &location_of, None);
    let per_window_w = eval.evaluate(&sums);
    let (mlc_index, lambda) = eval.maximum(&sums);

    let outcome = permutation_test(&ranks, &windows, &location_of, lambda, config.permutations, config.seed)
        .map_err(|e| e.at_stage("permutation_pvalue"))?;

    Ok(ScanResult {
        lambda,
        mlc: windows.windows()[mlc_index].clone(),
        mlc_index,
        per_window_w,
        windows,
        p_value: outcome.p_value,
        permutations: config.permutations,
        seed: config.seed,
        exceedances: outcome.exceedances,
        design,
        encoding,
        ranks,
        location_of,
    })
}
