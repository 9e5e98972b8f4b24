//! Replicated simulation studies: power and cluster-recovery rates.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scan::{run_scan, ScanConfig, ScanResult};
use crate::simulate::{derive_seed, simulate_dataset, Scenario, ScenarioSpec};
use crate::trajectory::{Location, SpatialDataset};

/// Site and individual level agreement between a planted and a detected
/// cluster. A rate is `None` when its denominator is empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Confusion {
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
    pub ppv: Option<f64>,
}

/// Both sets hold location indices into `dataset`.
pub fn confusion_metrics(true_cluster: &[usize], detected: &[usize], dataset: &SpatialDataset) -> Confusion {
    let k = dataset.locations().len();
    let counts = dataset.counts();
    let mut in_w = vec![false; k];
    for &l in true_cluster {
        in_w[l] = true;
    }
    let w = in_w.iter().filter(|&&b| b).count();
    let hit = detected.iter().filter(|&&l| in_w[l]).count();
    let miss = detected.len() - hit;
    let detected_n: usize = detected.iter().map(|&l| counts[l]).sum();
    let detected_in_w: usize = detected.iter().filter(|&&l| in_w[l]).map(|&l| counts[l]).sum();
    let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
    Confusion {
        tpr: ratio(hit, w),
        fpr: ratio(miss, k - w),
        ppv: ratio(detected_in_w, detected_n),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyOptions {
    pub replicates: usize,
    pub significance: f64,
    pub seed: u64,
    /// `scan.seed` is ignored; every replicate derives its own.
    pub scan: ScanConfig,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            replicates: 200,
            significance: 0.05,
            seed: 1,
            scan: ScanConfig {
                permutations: 199,
                ..ScanConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutcome {
    pub index: usize,
    pub p_value: f64,
    pub rejected: bool,
    pub detected: Vec<usize>,
    pub confusion: Confusion,
}

fn cell_key(spec: &ScenarioSpec) -> u64 {
    let tag = match spec.scenario {
        Scenario::I => 1,
        Scenario::II => 2,
        Scenario::III => 3,
    };
    spec.strength.to_bits() ^ (tag << 56)
}

/// Seeds of replicate `rep`: datasets depend only on the scenario, strength
/// and study seed, so runs that differ in scan settings see the same data.
pub fn replicate_seeds(seed: u64, spec: &ScenarioSpec, rep: usize) -> (u64, u64) {
    let data = derive_seed(seed, cell_key(spec), rep as u64);
    (data, derive_seed(data, 0x7065_726d, 0))
}

/// Runs every replicate of one grid cell; `inspect` sees each dataset with
/// its scan. Failed replicates are logged and left out.
pub fn run_replicates<F>(
    locations: &[Location],
    spec: &ScenarioSpec,
    opts: &StudyOptions,
    inspect: F,
) -> Result<Vec<ReplicateOutcome>>
where
    F: Fn(&SpatialDataset, &ScanResult) + Sync,
{
    let cluster: Vec<usize> = spec
        .cluster
        .iter()
        .map(|id| {
            locations
                .iter()
                .position(|l| &l.id == id)
                .ok_or_else(|| crate::Error::UnknownClusterLocation(id.clone()))
        })
        .collect::<Result<_>>()?;

    let outcomes: Vec<Option<ReplicateOutcome>> = (0..opts.replicates)
        .into_par_iter()
        .map(|rep| {
            let (data_seed, scan_seed) = replicate_seeds(opts.seed, spec, rep);
            let run = || -> Result<ReplicateOutcome> {
                let dataset = simulate_dataset(locations, spec, data_seed)?;
                let config = ScanConfig {
                    seed: scan_seed,
                    ..opts.scan
                };
                let result = run_scan(&dataset, &config)?;
                inspect(&dataset, &result);
                let confusion = confusion_metrics(&cluster, &result.mlc.members, &dataset);
                Ok(ReplicateOutcome {
                    index: rep,
                    p_value: result.p_value,
                    rejected: result.is_significant(opts.significance),
                    detected: result.mlc.members,
                    confusion,
                })
            };
            match run() {
                Ok(o) => Some(o),
                Err(e) => {
                    log::warn!("scenario {} strength {} replicate {rep} skipped: {e}", spec.scenario, spec.strength);
                    None
                }
            }
        })
        .collect();
    Ok(outcomes.into_iter().flatten().collect())
}

/// One line of `metrics.csv`. Rates average over rejecting replicates only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub scenario: Scenario,
    pub strength: f64,
    pub basis_size: usize,
    pub replicates: usize,
    pub skipped: usize,
    pub rejections: usize,
    pub permutations: usize,
    pub significance_level: f64,
    pub power: f64,
    pub mean_tpr: Option<f64>,
    pub mean_fpr: Option<f64>,
    pub mean_ppv: Option<f64>,
    pub runtime_seconds: f64,
}

pub fn summarize(
    spec: &ScenarioSpec,
    opts: &StudyOptions,
    outcomes: &[ReplicateOutcome],
    runtime_seconds: f64,
) -> MetricsRow {
    let rejecting: Vec<&ReplicateOutcome> = outcomes.iter().filter(|o| o.rejected).collect();
    let mean = |f: fn(&Confusion) -> Option<f64>| {
        let vals: Vec<f64> = rejecting.iter().filter_map(|o| f(&o.confusion)).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };
    let completed = outcomes.len();
    MetricsRow {
        scenario: spec.scenario,
        strength: spec.strength,
        basis_size: opts.scan.basis.size,
        replicates: opts.replicates,
        skipped: opts.replicates - completed,
        rejections: rejecting.len(),
        permutations: opts.scan.permutations,
        significance_level: opts.significance,
        power: if completed == 0 {
            0.0
        } else {
            rejecting.len() as f64 / completed as f64
        },
        mean_tpr: mean(|c| c.tpr),
        mean_fpr: mean(|c| c.fpr),
        mean_ppv: mean(|c| c.ppv),
        runtime_seconds,
    }
}

pub fn run_study(locations: &[Location], grid: &[ScenarioSpec], opts: &StudyOptions) -> Result<Vec<MetricsRow>> {
    grid.iter()
        .map(|spec| {
            let start = Instant::now();
            let outcomes = run_replicates(locations, spec, opts, |_, _| {})?;
            let row = summarize(spec, opts, &outcomes, start.elapsed().as_secs_f64());
            log::info!(
                "scenario {} strength {}: power {:.3} ({} of {})",
                spec.scenario,
                spec.strength,
                row.power,
                row.rejections,
                outcomes.len()
            );
            Ok(row)
        })
        .collect()
}

pub fn write_metrics_csv<W: Write>(rows: &[MetricsRow], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    for row in rows {
        wtr.serialize(row).map_err(std::io::Error::from)?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct PowerPoint {
    scenario: Scenario,
    strength: f64,
    basis_size: usize,
    power: f64,
}

pub fn write_power_curve_csv<W: Write>(rows: &[MetricsRow], out: W) -> Result<()> {
    let mut sorted: Vec<&MetricsRow> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        (a.scenario as u8, a.basis_size)
            .cmp(&(b.scenario as u8, b.basis_size))
            .then(a.strength.total_cmp(&b.strength))
    });
    let mut wtr = csv::Writer::from_writer(out);
    for r in sorted {
        wtr.serialize(PowerPoint {
            scenario: r.scenario,
            strength: r.strength,
            basis_size: r.basis_size,
            power: r.power,
        })
        .map_err(std::io::Error::from)?;
    }
    wtr.flush()?;
    Ok(())
}
