//! Acceptance run: prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::process::{Command, ExitCode};
use std::sync::Mutex;
use std::time::Instant;

use cfss::ingest::CategorizationScheme;
use cfss::nalgebra::DMatrix;
use cfss::rank::{multivariate_ranks, tyler_ranks, TylerOptions};
use cfss::scan::{dwass_pvalue, enumerate_windows, find_mlc, permutation_pvalue};
use cfss::simulate::Scenario;
use cfss::study::{run_replicates, summarize, MetricsRow, ReplicateOutcome, StudyOptions};
use cfss::{fixtures, BasisSpec, Location, ScanResult, ScenarioSpec, SpatialDataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Worst values seen across every study dataset.
#[derive(Default)]
struct Audit {
    datasets: usize,
    mean_ratio: f64,
    offdiag_rel: f64,
    diag_rel: f64,
    lambda_over_t: f64,
    sphericity_ratio: f64,
    rank_sum_ratio: f64,
    one_d_error: f64,
}

impl Audit {
    fn record(&mut self, dataset: &SpatialDataset, result: &ScanResult) {
        let enc = &result.encoding;
        let c = common::check_encoding(&enc.scores, &enc.eigenvalues, dataset.horizon());
        let r = &result.ranks;
        let n = r.n() as f64;
        let rank_sum = (0..r.ranks.ncols()).map(|c| r.ranks.column(c).sum().abs()).fold(0.0, f64::max);

        let first: Vec<f64> = enc.scores.column(0).iter().copied().collect();
        let one_d = multivariate_ranks(&DMatrix::from_column_slice(first.len(), 1, &first), &DMatrix::identity(1, 1))
            .expect("one-dimensional ranks");
        let one_d_error = common::one_d_ranks(&first)
            .iter()
            .zip(one_d.ranks.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);

        self.datasets += 1;
        self.mean_ratio = self.mean_ratio.max(c.mean_ratio);
        self.offdiag_rel = self.offdiag_rel.max(c.offdiag_rel);
        self.diag_rel = self.diag_rel.max(c.diag_rel);
        self.lambda_over_t = self.lambda_over_t.max(c.lambda_over_t);
        self.sphericity_ratio = self.sphericity_ratio.max(r.sphericity_residual / (r.sum_sq / n));
        self.rank_sum_ratio = self.rank_sum_ratio.max(rank_sum / n);
        self.one_d_error = self.one_d_error.max(one_d_error);
    }
}

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, n: usize, pass: bool, detail: String) {
        if !pass {
            self.failures += 1;
        }
        println!("criterion {n}: {} {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn study_options(replicates: usize, basis_size: usize) -> StudyOptions {
    let mut opts = StudyOptions {
        replicates,
        ..StudyOptions::default()
    };
    opts.scan.basis = BasisSpec::bspline(basis_size, 3);
    opts
}

fn cell(
    locations: &[Location],
    scenario: Scenario,
    strength: f64,
    opts: &StudyOptions,
    audit: &Mutex<Audit>,
) -> (MetricsRow, Vec<ReplicateOutcome>) {
    let spec = ScenarioSpec::new(scenario, strength, fixtures::cluster_idf());
    let start = Instant::now();
    let outcomes = run_replicates(locations, &spec, opts, |ds, res| audit.lock().unwrap().record(ds, res))
        .expect("cluster ids belong to the geometry");
    let row = summarize(&spec, opts, &outcomes, start.elapsed().as_secs_f64());
    eprintln!(
        "  scenario {} strength {} L={}: power {:.3}, {} skipped, {:.0}s",
        row.scenario, row.strength, row.basis_size, row.power, row.skipped, row.runtime_seconds
    );
    (row, outcomes)
}

fn fmt(x: Option<f64>) -> String {
    x.map_or("n/a".into(), |v| format!("{v:.3}"))
}

fn type_one_error(report: &mut Report, locations: &[Location], audit: &Mutex<Audit>) {
    let (row, _) = cell(locations, Scenario::I, 0.0, &study_options(200, 10), audit);
    let pass = row.skipped == 0 && (0.02..=0.09).contains(&row.power);
    report.line(1, pass, format!("scenario i α=0: rejection rate {:.3} over {} replicates", row.power, row.replicates));
}

fn power_and_recovery(report: &mut Report, locations: &[Location], audit: &Mutex<Audit>) -> f64 {
    let opts = study_options(100, 10);
    let rows: Vec<MetricsRow> = [(Scenario::I, 0.75), (Scenario::II, 0.30), (Scenario::III, 0.50)]
        .into_iter()
        .map(|(sc, s)| cell(locations, sc, s, &opts, audit).0)
        .collect();

    let power_ok = rows.iter().all(|r| r.skipped == 0 && r.power >= 0.9);
    let detail: Vec<String> = rows.iter().map(|r| format!("{} {}: {:.2}", r.scenario, r.strength, r.power)).collect();
    report.line(2, power_ok, format!("power {}", detail.join(", ")));

    let recovery_ok = rows.iter().all(|r| {
        r.mean_fpr.is_some_and(|v| v <= 0.05) && r.mean_tpr.is_some_and(|v| v >= 0.85) && r.mean_ppv.is_some_and(|v| v >= 0.85)
    });
    let detail: Vec<String> = rows
        .iter()
        .map(|r| format!("{}: FPR {} TPR {} PPV {}", r.scenario, fmt(r.mean_fpr), fmt(r.mean_tpr), fmt(r.mean_ppv)))
        .collect();
    report.line(3, recovery_ok, detail.join("; "));
    rows[0].power
}

fn basis_robustness(report: &mut Report, locations: &[Location], audit: &Mutex<Audit>, power_l10: f64) {
    let mut powers = vec![(10, power_l10)];
    for l in [20, 30] {
        powers.push((l, cell(locations, Scenario::I, 0.75, &study_options(100, l), audit).0.power));
    }
    let spread = powers.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max)
        - powers.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let detail: Vec<String> = powers.iter().map(|(l, p)| format!("L={l}: {p:.2}")).collect();
    report.line(4, spread <= 0.1, format!("scenario i α=0.75 {} (spread {spread:.2})", detail.join(", ")));
}

fn encoding_properties(report: &mut Report, audit: &Audit) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    while checked < 200 {
        let n = rng.gen_range(3..=5);
        let k = rng.gen_range(2..=n.min(3));
        let j = rng.gen_range(2..=3);
        let t = rng.gen_range(1.0..20.0);
        let ds = common::random_dataset(&mut rng, k, n, j, t);
        for (linear, spec) in [(true, BasisSpec::bspline(2, 1)), (false, BasisSpec::bspline(1, 0))] {
            let oracle = common::oracle_eigenvalues(&ds, linear);
            if oracle.is_empty() {
                continue;
            }
            let basis = spec.build(t).expect("valid basis");
            let design = cfss::fmca::build_design(&ds, &basis).expect("valid design");
            let prod = cfss::fmca::solve_fmca(&design, 0.9).expect("non-trivial encoding").eigenvalues;
            if prod.len() != oracle.len() {
                worst = f64::INFINITY;
            } else {
                worst = prod.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
            }
            checked += 1;
        }
    }
    let pass = audit.datasets > 0
        && audit.mean_ratio < 1e-8
        && audit.offdiag_rel < 1e-6
        && audit.diag_rel < 1e-6
        && audit.lambda_over_t < 1.0
        && worst <= 1e-10;
    report.line(
        5,
        pass,
        format!(
            "{} datasets: |mean|/√λ1 {:.1e}, off-diagonal {:.1e}, diagonal {:.1e}, λ1/T {:.3}; oracle max error {:.1e} on {checked} instances",
            audit.datasets, audit.mean_ratio, audit.offdiag_rel, audit.diag_rel, audit.lambda_over_t, worst
        ),
    );
}

fn rank_properties(report: &mut Report, audit: &Audit) {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut one_d: f64 = audit.one_d_error;
    let mut sphericity: f64 = audit.sphericity_ratio;
    let mut rank_sum: f64 = audit.rank_sum_ratio;
    for _ in 0..100 {
        let n = rng.gen_range(2..60);
        let m = rng.gen_range(1..5);
        let z = DMatrix::from_fn(n, m, |_, _| rng.gen_range(-5.0..5.0));
        let col: Vec<f64> = z.column(0).iter().copied().collect();
        let r1 = multivariate_ranks(&DMatrix::from_column_slice(n, 1, &col), &DMatrix::identity(1, 1)).unwrap();
        one_d = common::one_d_ranks(&col).iter().zip(r1.ranks.iter()).map(|(a, b)| (a - b).abs()).fold(one_d, f64::max);
        if n > m + 1 {
            let r = tyler_ranks(&z, TylerOptions::default()).unwrap();
            let (gap, sum_sq) = common::sphericity_gap(&r.ranks);
            sphericity = sphericity.max(gap / (sum_sq / n as f64));
            let s = (0..m).map(|c| r.ranks.column(c).sum().abs()).fold(0.0, f64::max);
            rank_sum = rank_sum.max(s / n as f64);
        }
    }
    let pass = one_d <= 1e-12 && sphericity <= 1e-6 && rank_sum <= 1e-10;
    report.line(
        6,
        pass,
        format!("1-D error {one_d:.1e}, sphericity/(sum_sq/n) {sphericity:.1e}, |ΣR|/n {rank_sum:.1e}"),
    );
}

fn scan_correctness(report: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < 50 {
        let inst = common::scan_instance(&mut rng);
        let ranks = tyler_ranks(&inst.scores, TylerOptions::default()).unwrap();
        let windows = enumerate_windows(&inst.locations, &inst.counts);
        if windows.is_empty() {
            continue;
        }
        let (_, lambda) = find_mlc(&ranks, &windows, &inst.location_of).unwrap();
        let brute = common::brute_force_lambda(&inst.locations, &inst.location_of, &ranks.ranks);
        worst = worst.max((lambda - brute).abs() / brute.max(1.0));
        done += 1;
    }
    report.line(7, worst <= 1e-12, format!("max relative gap to brute force {worst:.1e} over {done} instances"));
}

fn inference_formula(report: &mut Report) {
    let mut exact = dwass_pvalue(0, 999) == 0.001 && dwass_pvalue(999, 999) == 1.0 && dwass_pvalue(4, 99) == 0.05;

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for trial in 0..10u64 {
        let n = 30;
        let location_of: Vec<usize> = (0..n).map(|i| i % 6).collect();
        let z = DMatrix::from_fn(n, 2, |_, _| rng.gen_range(-1.0..1.0));
        let ranks = tyler_ranks(&z, TylerOptions::default()).unwrap();
        let windows = enumerate_windows(&common::random_locations(&mut rng, 6), &[5; 6]);
        let (_, observed) = find_mlc(&ranks, &windows, &location_of).unwrap();
        let out = permutation_pvalue(&ranks, &windows, &location_of, 99, trial).unwrap();
        let exceed = out.null_statistics.iter().filter(|&&s| s >= observed).count();
        exact &= out.exceedances == exceed && out.p_value == (1 + exceed) as f64 / 100.0;
    }

    let k = 10;
    let location_of: Vec<usize> = (0..100).map(|i| i / 10).collect();
    let z = DMatrix::from_fn(100, 2, |i, c| rng.gen_range(-1.0..1.0) + if i < 30 && c == 0 { 20.0 } else { 0.0 });
    let ranks = tyler_ranks(&z, TylerOptions::default()).unwrap();
    let line: Vec<Location> = (0..k).map(|i| Location::new(format!("s{i}"), i as f64, 0.0)).collect();
    let out = permutation_pvalue(&ranks, &enumerate_windows(&line, &[10; 10]), &location_of, 999, 3).unwrap();
    let separated = out.exceedances == 0 && out.p_value == 0.001;
    report.line(
        8,
        exact && separated,
        format!("formula exact on random cases; separated case p̂ = {} with {} exceedances at P=999", out.p_value, out.exceedances),
    );
}

fn categorization_goldens(report: &mut Report) {
    let scheme = CategorizationScheme::atmo();
    let goldens = [
        (0.0, "Good"),
        (15.0, "Good"),
        (20.0, "Good"),
        (20.01, "Average"),
        (40.0, "Average"),
        (40.5, "Degraded"),
        (50.0, "Degraded"),
        (50.01, "Bad"),
        (100.0, "Bad"),
        (120.0, "Bad"),
        (150.0, "Bad"),
        (151.0, "Bad"),
        (1e6, "Bad"),
    ];
    let wrong: Vec<String> = goldens
        .iter()
        .filter_map(|&(v, want)| {
            let got = scheme.categorize(v).map(str::to_string).unwrap_or_else(|e| e.to_string());
            (got != want).then(|| format!("{v} → {got}, want {want}"))
        })
        .collect();
    let labels = scheme.state_space().labels();
    let labels_ok = labels == ["Good", "Average", "Degraded", "Bad"];
    let intervals: Vec<usize> = (0..2000).map(|i| scheme.interval_index(i as f64 * 0.1).unwrap()).collect();
    let monotone = intervals.windows(2).all(|w| w[0] <= w[1]) && intervals.last() == Some(&5);
    let negative_rejected = scheme.categorize(-0.5).is_err();
    report.line(
        9,
        wrong.is_empty() && labels_ok && monotone && negative_rejected,
        if wrong.is_empty() {
            format!("{} goldens, merged labels {:?}", goldens.len(), labels)
        } else {
            wrong.join("; ")
        },
    );
}

fn end_to_end_cli(report: &mut Report) {
    let dir = tempfile::tempdir().unwrap();
    let traj = dir.path().join("traj.csv");
    let locs = dir.path().join("locs.csv");
    let out = dir.path().join("out");
    let bin = env!("CARGO_BIN_EXE_cfss");
    let sim = Command::new(bin)
        .args(["simulate", "--scenario", "i", "--strength", "0.75", "--seed", "1", "--out"])
        .arg(&traj)
        .arg("--locations-out")
        .arg(&locs)
        .status()
        .unwrap();
    let scan = Command::new(bin)
        .args(["scan", "--permutations", "999", "--seed", "1", "--trajectories"])
        .arg(&traj)
        .arg("--locations")
        .arg(&locs)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    let parsed: Option<serde_json::Value> = std::fs::read_to_string(out.join("result.json"))
        .ok()
        .and_then(|s| serde_json::from_str(&s).ok());
    let Some(result) = parsed.filter(|_| sim.success() && scan.status.success()) else {
        report.line(10, false, format!("CLI run failed: {}", String::from_utf8_lossy(&scan.stderr)));
        return;
    };
    let p = result["p_value"].as_f64().unwrap_or(1.0);
    let mlc: Vec<String> = result["mlc"]["location_ids"]
        .as_array()
        .map(|a| a.iter().filter_map(|v| v.as_str().map(String::from)).collect())
        .unwrap_or_default();
    let planted = fixtures::cluster_idf();
    let tpr = planted.iter().filter(|id| mlc.contains(id)).count() as f64 / planted.len() as f64;
    let ppv = mlc.iter().filter(|id| planted.contains(id)).count() as f64 / mlc.len().max(1) as f64;
    report.line(
        10,
        p <= 0.005 && tpr == 1.0 && ppv >= 0.85,
        format!("p̂ = {p} at P=999, MLC {mlc:?} (TPR {tpr:.2}, PPV {ppv:.2})"),
    );
}

fn main() -> ExitCode {
    let locations = fixtures::departements();
    let audit = Mutex::new(Audit::default());
    let mut report = Report { failures: 0 };
    let start = Instant::now();

    type_one_error(&mut report, &locations, &audit);
    let power_l10 = power_and_recovery(&mut report, &locations, &audit);
    basis_robustness(&mut report, &locations, &audit, power_l10);
    let audit = audit.into_inner().unwrap();
    encoding_properties(&mut report, &audit);
    rank_properties(&mut report, &audit);
    scan_correctness(&mut report);
    inference_formula(&mut report);
    categorization_goldens(&mut report);
    end_to_end_cli(&mut report);

    println!(
        "acceptance: {} of 10 criteria passed in {:.0}s",
        10 - report.failures,
        start.elapsed().as_secs_f64()
    );
    if report.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
