//! Scan outputs: `result.json`, `mlc.geojson` and `summary.txt`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::Result;
use crate::scan::ScanResult;
use crate::trajectory::SpatialDataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlcReport {
    pub center_id: String,
    pub through_id: String,
    pub radius: f64,
    pub location_ids: Vec<String>,
    pub n_individuals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanReport {
    pub lambda: f64,
    pub p_value: f64,
    pub permutations: usize,
    pub seed: u64,
    pub significance: f64,
    pub significant: bool,
    pub mlc: MlcReport,
    pub windows_evaluated: usize,
    pub n_locations: usize,
    pub n_individuals: usize,
    pub n_components: usize,
    pub explained_variance: f64,
    pub dropped_stations: Vec<String>,
}

impl ScanReport {
    pub fn new(dataset: &SpatialDataset, result: &ScanResult, significance: f64, dropped: Vec<String>) -> Self {
        let locs = dataset.locations();
        let w = &result.mlc;
        Self {
            lambda: result.lambda,
            p_value: result.p_value,
            permutations: result.permutations,
            seed: result.seed,
            significance,
            significant: result.is_significant(significance),
            mlc: MlcReport {
                center_id: locs[w.center].id.clone(),
                through_id: locs[w.through].id.clone(),
                radius: w.radius,
                location_ids: w.members.iter().map(|&k| locs[k].id.clone()).collect(),
                n_individuals: w.n_individuals,
            },
            windows_evaluated: result.windows.len(),
            n_locations: locs.len(),
            n_individuals: dataset.n_individuals(),
            n_components: result.encoding.m,
            explained_variance: result.encoding.explained[result.encoding.m - 1],
            dropped_stations: dropped,
        }
    }
}

/// Point features at the planar coordinates, flagged by MLC membership.
pub fn mlc_geojson(dataset: &SpatialDataset, result: &ScanResult) -> Value {
    let counts = dataset.counts();
    let features: Vec<Value> = dataset
        .locations()
        .iter()
        .enumerate()
        .map(|(k, loc)| {
            json!({
                "type": "Feature",
                "geometry": { "type": "Point", "coordinates": [loc.x, loc.y] },
                "properties": {
                    "location_id": loc.id,
                    "in_mlc": result.mlc.contains(k),
                    "n_individuals": counts[k],
                }
            })
        })
        .collect();
    json!({ "type": "FeatureCollection", "features": features })
}

/// Mean share of the horizon spent in each state, inside and outside the
/// MLC, as `(label, inside, outside)`.
pub fn occupancy(dataset: &SpatialDataset, members: &[usize]) -> Vec<(String, f64, f64)> {
    let j = dataset.n_states();
    let t = dataset.horizon();
    let mut inside = vec![0.0; j];
    let mut outside = vec![0.0; j];
    let (mut n_in, mut n_out) = (0usize, 0usize);
    for (k, ind) in dataset.iter_individuals() {
        let (acc, n) = if members.contains(&k) {
            (&mut inside, &mut n_in)
        } else {
            (&mut outside, &mut n_out)
        };
        *n += 1;
        for (a, d) in acc.iter_mut().zip(ind.path.sojourn_durations(j)) {
            *a += d / t;
        }
    }
    let mean = |v: f64, n: usize| if n == 0 { f64::NAN } else { v / n as f64 };
    dataset
        .state_space()
        .labels()
        .iter()
        .enumerate()
        .map(|(s, label)| (label.clone(), mean(inside[s], n_in), mean(outside[s], n_out)))
        .collect()
}

pub fn summary_text(dataset: &SpatialDataset, result: &ScanResult, report: &ScanReport) -> String {
    let mut s = String::new();
    let verdict = if report.significant { "significant" } else { "not significant" };
    let _ = writeln!(s, "Most likely cluster");
    let _ = writeln!(
        s,
        "  centre {} through {} (radius {:.4})",
        report.mlc.center_id, report.mlc.through_id, report.mlc.radius
    );
    let _ = writeln!(
        s,
        "  {} of {} locations, {} of {} individuals",
        report.mlc.location_ids.len(),
        report.n_locations,
        report.mlc.n_individuals,
        report.n_individuals
    );
    let _ = writeln!(s, "  members: {}", report.mlc.location_ids.join(", "));
    let _ = writeln!(s);
    let _ = writeln!(s, "Scan statistic {:.6}", report.lambda);
    let _ = writeln!(
        s,
        "p-value {:.6} with {} permutations (seed {}), {verdict} at {}",
        report.p_value, report.permutations, report.seed, report.significance
    );
    let _ = writeln!(
        s,
        "{} candidate windows, {} score dimensions ({:.1}% of variance)",
        report.windows_evaluated,
        report.n_components,
        100.0 * report.explained_variance
    );
    let _ = writeln!(s);
    let _ = writeln!(s, "Mean share of time per state");
    let width = dataset.state_space().labels().iter().map(String::len).max().unwrap_or(5).max(5);
    let _ = writeln!(s, "  {:<width$}  {:>8}  {:>8}", "state", "inside", "outside");
    for (label, inside, outside) in occupancy(dataset, &result.mlc.members) {
        let _ = writeln!(s, "  {label:<width$}  {inside:>8.4}  {outside:>8.4}");
    }
    if !report.dropped_stations.is_empty() {
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "Dropped {} station(s): {}",
            report.dropped_stations.len(),
            report.dropped_stations.join(", ")
        );
    }
    s
}

/// Writes the three report files into `dir`.
pub fn write_reports(dir: &Path, dataset: &SpatialDataset, result: &ScanResult, report: &ScanReport) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("result.json"), serde_json::to_string_pretty(report)? + "\n")?;
    std::fs::write(
        dir.join("mlc.geojson"),
        serde_json::to_string_pretty(&mlc_geojson(dataset, result))? + "\n",
    )?;
    std::fs::write(dir.join("summary.txt"), summary_text(dataset, result, report))?;
    Ok(())
}
