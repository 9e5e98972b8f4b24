//! Markov jump process generator for the three benchmark scenarios.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{Individual, Location, SpatialDataset, StatePath, StateSpace};

pub const STATE_LABELS: [&str; 3] = ["e1", "e2", "e3"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    I,
    II,
    III,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::I, Scenario::II, Scenario::III];

    /// Strength values used in the published study grid.
    pub fn grid(self) -> &'static [f64] {
        match self {
            Scenario::I => &[0.0, 0.15, 0.30, 0.45, 0.60, 0.75],
            Scenario::II => &[0.0, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30],
            Scenario::III => &[0.0, 0.10, 0.20, 0.30, 0.40, 0.50],
        }
    }

    pub fn max_strength(self) -> f64 {
        *self.grid().last().unwrap()
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::I => "i",
            Scenario::II => "ii",
            Scenario::III => "iii",
        })
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "i" | "1" => Ok(Scenario::I),
            "ii" | "2" => Ok(Scenario::II),
            "iii" | "3" => Ok(Scenario::III),
            other => Err(Error::Config(format!("unknown scenario `{other}` (expected i, ii or iii)"))),
        }
    }
}

/// How an intensity λ_j sets the exponential holding time in state j.
/// Either way λ_j = 0 makes the state absorbing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Holding {
    /// λ_j is the rate: mean holding time 1/λ_j.
    #[default]
    Rate,
    /// λ_j is the mean holding time.
    Mean,
}

impl FromStr for Holding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rate" => Ok(Holding::Rate),
            "mean" => Ok(Holding::Mean),
            other => Err(Error::Config(format!("unknown holding convention `{other}` (expected rate or mean)"))),
        }
    }
}

impl fmt::Display for Holding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Holding::Rate => "rate",
            Holding::Mean => "mean",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    /// α for scenarios i and ii, γ for scenario iii.
    pub strength: f64,
    pub horizon: f64,
    pub per_location: usize,
    pub cluster: Vec<String>,
    #[serde(default)]
    pub holding: Holding,
}

impl ScenarioSpec {
    pub fn new(scenario: Scenario, strength: f64, cluster: Vec<String>) -> Self {
        Self {
            scenario,
            strength,
            horizon: 18.0,
            per_location: 10,
            cluster,
            holding: Holding::default(),
        }
    }

    fn warn_if_off_grid(&self) {
        let max = self.scenario.max_strength();
        if !(0.0..=max).contains(&self.strength) {
            log::warn!(
                "scenario {} strength {} lies outside the studied range [0, {}]",
                self.scenario,
                self.strength,
                max
            );
        }
    }
}

/// Embedded chain `transition` (row-stochastic, zero diagonal) and
/// `intensities` read according to `holding`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpModel {
    pub transition: [[f64; 3]; 3],
    pub intensities: [f64; 3],
    pub holding: Holding,
}

impl JumpModel {
    /// Mean holding time in `state`, `None` when absorbing.
    pub fn mean_holding(&self, state: usize) -> Option<f64> {
        let l = self.intensities[state];
        if l <= 0.0 {
            return None;
        }
        Some(match self.holding {
            Holding::Rate => 1.0 / l,
            Holding::Mean => l,
        })
    }
}

pub fn scenario_params(spec: &ScenarioSpec, in_cluster: bool) -> JumpModel {
    let s = if in_cluster { spec.strength } else { 0.0 };
    let holding = spec.holding;
    match spec.scenario {
        Scenario::I => JumpModel {
            transition: [[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]],
            intensities: [0.2 + s; 3],
            holding,
        },
        Scenario::II => JumpModel {
            transition: [[0.0, 1.0, 0.0], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]],
            intensities: [0.2 + s, 0.2 + s, 0.0],
            holding,
        },
        Scenario::III => JumpModel {
            transition: [[0.0, 1.0, 0.0], [0.7 - s, 0.0, 0.3 + s], [0.5, 0.5, 0.0]],
            intensities: [0.2, 0.2, 0.0],
            holding,
        },
    }
}

fn next_state<R: Rng + ?Sized>(row: &[f64; 3], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (j, &p) in row.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = j;
        if u < acc {
            return j;
        }
    }
    last
}

/// One trajectory on `[0, horizon]` started in the first state.
pub fn simulate_path<R: Rng + ?Sized>(model: &JumpModel, horizon: f64, rng: &mut R) -> StatePath {
    let mut segments = vec![(0.0, 0usize)];
    let mut t = 0.0;
    let mut state = 0usize;
    loop {
        let Some(mean) = model.mean_holding(state) else {
            break;
        };
        let u: f64 = rng.gen();
        t += -mean * (1.0 - u).ln();
        if t >= horizon {
            break;
        }
        state = next_state(&model.transition[state], rng);
        segments.push((t, state));
    }
    StatePath::new(segments, horizon).expect("simulated jumps are increasing and inside the horizon")
}

/// RNG for the `index`-th individual of a dataset drawn with `seed`.
pub fn individual_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Mixes a study seed with a cell and replicate index into a dataset seed.
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(mix(mix(seed) ^ a) ^ b)
}

pub fn simulate_dataset(locations: &[Location], spec: &ScenarioSpec, seed: u64) -> Result<SpatialDataset> {
    spec.warn_if_off_grid();
    let ids: HashSet<&str> = locations.iter().map(|l| l.id.as_str()).collect();
    if let Some(bad) = spec.cluster.iter().find(|c| !ids.contains(c.as_str())) {
        return Err(Error::UnknownClusterLocation(bad.clone()));
    }
    let cluster: HashSet<&str> = spec.cluster.iter().map(String::as_str).collect();
    let inside = scenario_params(spec, true);
    let outside = scenario_params(spec, false);
    let per = spec.per_location;

    let groups: Vec<Vec<Individual>> = locations
        .par_iter()
        .enumerate()
        .map(|(k, loc)| {
            let model = if cluster.contains(loc.id.as_str()) {
                &inside
            } else {
                &outside
            };
            (0..per)
                .map(|i| {
                    let mut rng = individual_rng(seed, k * per + i);
                    let path = simulate_path(model, spec.horizon, &mut rng);
                    Individual::new(format!("{}_{}", loc.id, i + 1), path)
                })
                .collect()
        })
        .collect();

    SpatialDataset::new(StateSpace::new(STATE_LABELS)?, spec.horizon, locations.to_vec(), groups)
}
