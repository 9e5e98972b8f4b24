//! Categorical trajectories and the spatial layout they are observed on.
//!
//! A trajectory is stored as its jump list: the state entered at each jump
//! time, right-continuous, with the final state held up to the horizon.

use std::collections::HashSet;

use crate::error::{Error, Result};

/// Ordered set of `J >= 2` state labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    labels: Vec<String>,
}

impl StateSpace {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 2 {
            return Err(Error::InvalidStateSpace(format!(
                "need at least 2 states, got {}",
                labels.len()
            )));
        }
        let mut seen = HashSet::new();
        for label in &labels {
            if label.is_empty() {
                return Err(Error::InvalidStateSpace("empty state label".into()));
            }
            if !seen.insert(label.as_str()) {
                return Err(Error::InvalidStateSpace(format!("duplicate label `{label}`")));
            }
        }
        Ok(Self { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, state: usize) -> &str {
        &self.labels[state]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub state: usize,
}

impl From<(f64, usize)> for Segment {
    fn from((start, state): (f64, usize)) -> Self {
        Segment { start, state }
    }
}

/// Right-continuous piecewise-constant path on `[0, horizon]`.
///
/// Always in canonical form: first segment starts at 0, start times strictly
/// increase and stay below the horizon, and consecutive states differ.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePath {
    segments: Vec<Segment>,
    horizon: f64,
}

impl StatePath {
    /// Validates and normalises a raw jump list. Zero-duration segments are
    /// dropped (at equal start times the later one wins) and repeated states
    /// are merged.
    pub fn new<S: Into<Segment>>(segments: impl IntoIterator<Item = S>, horizon: f64) -> Result<Self> {
        let raw: Vec<Segment> = segments.into_iter().map(Into::into).collect();
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::invalid_path(format!("horizon {horizon} must be positive and finite")));
        }
        let first = raw
            .first()
            .ok_or_else(|| Error::invalid_path("path has no segments"))?;
        if first.start != 0.0 {
            return Err(Error::invalid_path(format!(
                "first segment starts at {} instead of 0",
                first.start
            )));
        }
        for pair in raw.windows(2) {
            if !(pair[1].start >= pair[0].start) {
                return Err(Error::invalid_path(format!(
                    "start times are not monotone ({} after {})",
                    pair[1].start, pair[0].start
                )));
            }
        }
        if let Some(bad) = raw.iter().find(|s| !s.start.is_finite() || s.start > horizon) {
            return Err(Error::invalid_path(format!(
                "start time {} outside [0, {horizon}]",
                bad.start
            )));
        }

        let mut segments: Vec<Segment> = Vec::with_capacity(raw.len());
        for (i, seg) in raw.iter().enumerate() {
            let end = raw.get(i + 1).map_or(horizon, |next| next.start);
            if end <= seg.start {
                continue;
            }
            match segments.last() {
                Some(last) if last.state == seg.state => {}
                _ => segments.push(*seg),
            }
        }
        debug_assert!(!segments.is_empty());
        Ok(Self { segments, horizon })
    }

    /// A path held in one state over the whole horizon.
    pub fn constant(state: usize, horizon: f64) -> Result<Self> {
        Self::new([(0.0, state)], horizon)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of jumps (state changes).
    pub fn jump_count(&self) -> usize {
        self.segments.len() - 1
    }

    /// `(start, end, state)` for every constant piece.
    pub fn intervals(&self) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        self.segments.iter().enumerate().map(move |(i, seg)| {
            let end = self.segments.get(i + 1).map_or(self.horizon, |s| s.start);
            (seg.start, end, seg.state)
        })
    }

    /// Value of the path at `t`, right-continuous at jumps.
    pub fn state_at(&self, t: f64) -> Result<usize> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::TimeOutOfDomain {
                t,
                horizon: self.horizon,
            });
        }
        let idx = self.segments.partition_point(|s| s.start <= t);
        Ok(self.segments[idx - 1].state)
    }

    /// Total time spent in each of `n_states` states. Sums to the horizon.
    pub fn sojourn_durations(&self, n_states: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_states];
        for (a, b, state) in self.intervals() {
            out[state] += b - a;
        }
        out
    }

    pub fn max_state(&self) -> usize {
        self.segments.iter().map(|s| s.state).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Location {
    pub id: String,
    pub x: f64,
    pub y: f64,
}

impl Location {
    pub fn new(id: impl Into<String>, x: f64, y: f64) -> Self {
        Self { id: id.into(), x, y }
    }

    pub fn distance(&self, other: &Location) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub id: String,
    pub path: StatePath,
}

impl Individual {
    pub fn new(id: impl Into<String>, path: StatePath) -> Self {
        Self { id: id.into(), path }
    }
}

/// Locations and the individuals observed at each of them.
///
/// Individuals are globally ordered location by location; that order is the
/// row order of every downstream matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialDataset {
    state_space: StateSpace,
    horizon: f64,
    locations: Vec<Location>,
    individuals: Vec<Vec<Individual>>,
}

impl SpatialDataset {
    /// Checks every dataset invariant and normalises the paths.
    pub fn new(
        state_space: StateSpace,
        horizon: f64,
        locations: Vec<Location>,
        individuals: Vec<Vec<Individual>>,
    ) -> Result<Self> {
        if locations.len() < 2 {
            return Err(Error::EmptyDataset(format!(
                "need at least 2 locations, got {}",
                locations.len()
            )));
        }
        if individuals.len() != locations.len() {
            return Err(Error::DimensionMismatch {
                expected: locations.len(),
                found: individuals.len(),
            });
        }
        let mut ids = HashSet::new();
        for loc in &locations {
            if !ids.insert(loc.id.as_str()) {
                return Err(Error::EmptyDataset(format!("duplicate location id `{}`", loc.id)));
            }
            if !(loc.x.is_finite() && loc.y.is_finite()) {
                return Err(Error::EmptyDataset(format!(
                    "location `{}` has non-finite coordinates",
                    loc.id
                )));
            }
        }
        let n: usize = individuals.iter().map(Vec::len).sum();
        if n < 2 {
            return Err(Error::EmptyDataset(format!("need at least 2 individuals, got {n}")));
        }

        let j = state_space.len();
        let mut normalised = Vec::with_capacity(individuals.len());
        for group in individuals {
            let mut out = Vec::with_capacity(group.len());
            for ind in group {
                if ind.path.horizon() != horizon {
                    return Err(Error::MismatchedHorizon {
                        expected: horizon,
                        found: ind.path.horizon(),
                    });
                }
                if ind.path.max_state() >= j {
                    return Err(Error::InvalidPath {
                        individual: Some(ind.id.clone()),
                        reason: format!("state index {} out of range for {j} states", ind.path.max_state()),
                    });
                }
                let path = StatePath::new(ind.path.segments().iter().copied(), horizon).map_err(|e| match e {
                    Error::InvalidPath { reason, .. } => Error::InvalidPath {
                        individual: Some(ind.id.clone()),
                        reason,
                    },
                    other => other,
                })?;
                out.push(Individual { id: ind.id, path });
            }
            normalised.push(out);
        }

        Ok(Self {
            state_space,
            horizon,
            locations,
            individuals: normalised,
        })
    }

    pub fn state_space(&self) -> &StateSpace {
        &self.state_space
    }

    pub fn n_states(&self) -> usize {
        self.state_space.len()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    pub fn individuals(&self) -> &[Vec<Individual>] {
        &self.individuals
    }

    pub fn location_index(&self, id: &str) -> Option<usize> {
        self.locations.iter().position(|l| l.id == id)
    }

    /// Individuals per location (`n_k`).
    pub fn counts(&self) -> Vec<usize> {
        self.individuals.iter().map(Vec::len).collect()
    }

    /// Total number of individuals `n`.
    pub fn n_individuals(&self) -> usize {
        self.individuals.iter().map(Vec::len).sum()
    }

    /// Location index of each individual in global order.
    pub fn location_of_individuals(&self) -> Vec<usize> {
        self.individuals
            .iter()
            .enumerate()
            .flat_map(|(k, group)| std::iter::repeat_n(k, group.len()))
            .collect()
    }

    /// `(location index, individual)` in global order.
    pub fn iter_individuals(&self) -> impl Iterator<Item = (usize, &Individual)> {
        self.individuals
            .iter()
            .enumerate()
            .flat_map(|(k, group)| group.iter().map(move |ind| (k, ind)))
    }

    pub fn paths(&self) -> impl Iterator<Item = &StatePath> {
        self.iter_individuals().map(|(_, ind)| &ind.path)
    }
}

/// Free-function form of [`SpatialDataset::new`].
pub fn validate_dataset(
    state_space: StateSpace,
    horizon: f64,
    locations: Vec<Location>,
    individuals: Vec<Vec<Individual>>,
) -> Result<SpatialDataset> {
    SpatialDataset::new(state_space, horizon, locations, individuals)
}
