//! Turning daily concentration series into categorical trajectories.

use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::trajectory::{Individual, Location, SpatialDataset, StatePath, StateSpace};

pub const DEFAULT_GAP_TOLERANCE: usize = 2;
const EARTH_RADIUS_KM: f64 = 6371.0;

/// Right-closed intervals `]b_{i-1}, b_i]` (the first one starting at 0
/// inclusive) mapped to labels, followed by a label merge map.
#[derive(Debug, Clone, PartialEq)]
pub struct CategorizationScheme {
    bounds: Vec<(f64, String)>,
    merge: HashMap<String, String>,
    states: StateSpace,
}

impl CategorizationScheme {
    pub fn new(bounds: Vec<(f64, String)>, merge: Vec<(String, String)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::InvalidScheme("no intervals".into()));
        }
        for (b, label) in &bounds {
            if b.is_nan() || *b < 0.0 {
                return Err(Error::InvalidScheme(format!("bad upper bound {b} for `{label}`")));
            }
        }
        if bounds.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidScheme("upper bounds must be strictly increasing".into()));
        }
        let labels: Vec<&str> = bounds.iter().map(|(_, l)| l.as_str()).collect();
        let mut map = HashMap::new();
        for (from, to) in merge {
            for l in [&from, &to] {
                if !labels.contains(&l.as_str()) {
                    return Err(Error::InvalidScheme(format!("merge refers to unknown label `{l}`")));
                }
            }
            if from != to {
                map.insert(from, to);
            }
        }
        let mut states: Vec<String> = Vec::new();
        for l in &labels {
            let resolved = resolve(&map, l, labels.len())?;
            if !states.iter().any(|s| s == resolved) {
                states.push(resolved.to_string());
            }
        }
        Ok(Self {
            states: StateSpace::new(states)?,
            bounds,
            merge: map,
        })
    }

    /// The Atmo PM10 index with "Very bad" and "Extremely bad" folded into
    /// "Bad".
    pub fn atmo() -> Self {
        let bounds = [
            (20.0, "Good"),
            (40.0, "Average"),
            (50.0, "Degraded"),
            (100.0, "Bad"),
            (150.0, "Very bad"),
            (f64::INFINITY, "Extremely bad"),
        ];
        Self::new(
            bounds.iter().map(|&(b, l)| (b, l.to_string())).collect(),
            vec![
                ("Very bad".into(), "Bad".into()),
                ("Extremely bad".into(), "Bad".into()),
            ],
        )
        .expect("built-in scheme is valid")
    }

    /// Parses rows `upper_bound,label` and `merge,from,to`; an optional
    /// `upper_bound,label` header and `#` comments are skipped. `inf` is an
    /// accepted bound.
    pub fn parse<R: Read>(input: R, source: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(input);
        let mut bounds = Vec::new();
        let mut merge = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Parse {
                path: source.to_string(),
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            let fail = |message: String| Error::Parse {
                path: source.to_string(),
                line,
                message,
            };
            match (rec.get(0), rec.len()) {
                (Some("upper_bound"), _) => {}
                (Some("merge"), 3) => merge.push((rec[1].to_string(), rec[2].to_string())),
                (Some(b), 2) => {
                    let bound: f64 = b.parse().map_err(|_| fail(format!("bad upper bound `{b}`")))?;
                    bounds.push((bound, rec[1].to_string()));
                }
                _ => return Err(fail("expected `upper_bound,label` or `merge,from,to`".into())),
            }
        }
        Self::new(bounds, merge).map_err(|e| match e {
            Error::InvalidScheme(m) => Error::InvalidScheme(format!("{source}: {m}")),
            other => other,
        })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(File::open(path)?, &path.display().to_string())
    }

    /// Labels before merging, in interval order.
    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.bounds.iter().map(|(_, l)| l.as_str())
    }

    /// Merged labels in order of first appearance.
    pub fn state_space(&self) -> &StateSpace {
        &self.states
    }

    /// Index of the interval containing `value`, before merging.
    pub fn interval_index(&self, value: f64) -> Result<usize> {
        if value.is_nan() || value < 0.0 {
            return Err(Error::NegativeValue(value));
        }
        let i = self.bounds.partition_point(|(b, _)| *b < value);
        if i == self.bounds.len() {
            return Err(Error::InvalidScheme(format!(
                "value {value} exceeds the largest upper bound {}",
                self.bounds[i - 1].0
            )));
        }
        Ok(i)
    }

    pub fn categorize(&self, value: f64) -> Result<&str> {
        let i = self.interval_index(value)?;
        resolve(&self.merge, &self.bounds[i].1, self.bounds.len())
    }

    /// State index of `value` in [`Self::state_space`].
    pub fn state_of(&self, value: f64) -> Result<usize> {
        let label = self.categorize(value)?;
        Ok(self.states.index_of(label).expect("merged labels are states"))
    }
}

impl Default for CategorizationScheme {
    fn default() -> Self {
        Self::atmo()
    }
}

fn resolve<'a>(map: &'a HashMap<String, String>, label: &'a str, limit: usize) -> Result<&'a str> {
    let mut cur = label;
    for _ in 0..=limit {
        match map.get(cur) {
            Some(next) => cur = next,
            None => return Ok(cur),
        }
    }
    Err(Error::InvalidScheme(format!("merge cycle through `{label}`")))
}

pub fn atmo_categorize(value: f64, scheme: &CategorizationScheme) -> Result<String> {
    scheme.categorize(value).map(str::to_string)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesRecord {
    pub station_id: String,
    pub date: NaiveDate,
    /// `None` for an empty value cell, treated as a missing day.
    pub value: Option<f64>,
    pub x: f64,
    pub y: f64,
}

#[derive(Deserialize)]
struct RawSeries {
    station_id: String,
    date: String,
    value: Option<f64>,
    x: f64,
    y: f64,
}

/// Reads `station_id,date,value,x,y` with ISO dates.
pub fn parse_series<R: Read>(input: R, source: &str) -> Result<Vec<SeriesRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            path: source.to_string(),
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let mut out = Vec::new();
    let mut raw = csv::StringRecord::new();
    loop {
        let more = rdr.read_record(&mut raw).map_err(|e| Error::Parse {
            path: source.to_string(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        if !more {
            break;
        }
        let line = raw.position().map_or(0, |p| p.line());
        let fail = |message: String| Error::Parse {
            path: source.to_string(),
            line,
            message,
        };
        let rec: RawSeries = raw.deserialize(Some(&headers)).map_err(|e| fail(e.to_string()))?;
        let date = NaiveDate::parse_from_str(&rec.date, "%Y-%m-%d")
            .map_err(|e| fail(format!("bad date `{}`: {e}", rec.date)))?;
        if let Some(v) = rec.value {
            if v.is_nan() || v < 0.0 {
                return Err(fail(Error::NegativeValue(v).to_string()));
            }
        }
        out.push(SeriesRecord {
            station_id: rec.station_id,
            date,
            value: rec.value,
            x: rec.x,
            y: rec.y,
        });
    }
    Ok(out)
}

pub fn read_series(path: impl AsRef<Path>) -> Result<Vec<SeriesRecord>> {
    let path = path.as_ref();
    parse_series(File::open(path)?, &path.display().to_string())
}

/// Planar km coordinates from `(x, y) = (lon, lat)` in degrees.
pub fn project_equirectangular(lon: f64, lat: f64, ref_lat: f64) -> (f64, f64) {
    let k = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;
    (k * lon * ref_lat.to_radians().cos(), k * lat)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscretizeOptions {
    /// Inclusive day window; defaults to the span of all records.
    pub window: Option<(NaiveDate, NaiveDate)>,
    pub gap_tolerance: usize,
}

impl Default for DiscretizeOptions {
    fn default() -> Self {
        Self {
            window: None,
            gap_tolerance: DEFAULT_GAP_TOLERANCE,
        }
    }
}

struct Station<'a> {
    id: &'a str,
    x: f64,
    y: f64,
    days: Vec<Option<usize>>,
    seen: Vec<bool>,
    duplicate: Option<NaiveDate>,
}

/// Daily labels to a step path: day `d` occupies `[d, d + 1)`. Runs of at
/// most `tolerance` missing days carry the previous label forward (a
/// leading run takes the first observed label).
fn station_path(st: &Station<'_>, t0: NaiveDate, tolerance: usize) -> Result<StatePath> {
    if let Some(date) = st.duplicate {
        return Err(Error::DuplicateTimestamps {
            station: st.id.to_string(),
            date: date.to_string(),
        });
    }
    let days = st.days.len();
    let mut i = 0;
    while i < days {
        if st.days[i].is_none() {
            let start = i;
            while i < days && st.days[i].is_none() {
                i += 1;
            }
            let missing = i - start;
            if missing > tolerance || missing == days {
                return Err(Error::MissingDays {
                    station: st.id.to_string(),
                    start: (t0 + chrono::Days::new(start as u64)).to_string(),
                    missing,
                    tolerance,
                });
            }
        } else {
            i += 1;
        }
    }
    let first = st.days.iter().flatten().next().copied().expect("at least one observed day");
    let mut current = first;
    let mut segments = Vec::new();
    for (d, label) in st.days.iter().enumerate() {
        let state = label.unwrap_or(current);
        if d == 0 || state != current {
            segments.push((d as f64, state));
        }
        current = state;
    }
    StatePath::new(segments, days as f64)
}

/// Result of a lenient conversion: stations that failed are listed with
/// their error instead of aborting.
#[derive(Debug)]
pub struct Discretized {
    pub dataset: SpatialDataset,
    pub dropped: Vec<(String, Error)>,
    pub start: NaiveDate,
}

pub fn discretize_lenient(
    records: &[SeriesRecord],
    scheme: &CategorizationScheme,
    opts: &DiscretizeOptions,
) -> Result<Discretized> {
    discretize(records, scheme, opts, true)
}

/// One individual per station at its own location; horizon = days in the
/// window. Fails on the first problematic station.
pub fn discretize_to_paths(
    records: &[SeriesRecord],
    scheme: &CategorizationScheme,
    opts: &DiscretizeOptions,
) -> Result<SpatialDataset> {
    discretize(records, scheme, opts, false).map(|d| d.dataset)
}

fn discretize(
    records: &[SeriesRecord],
    scheme: &CategorizationScheme,
    opts: &DiscretizeOptions,
    lenient: bool,
) -> Result<Discretized> {
    let (t0, t1) = match opts.window {
        Some(w) => w,
        None => {
            let lo = records.iter().map(|r| r.date).min();
            let hi = records.iter().map(|r| r.date).max();
            match (lo, hi) {
                (Some(lo), Some(hi)) => (lo, hi),
                _ => return Err(Error::EmptyDataset("no series records".into())),
            }
        }
    };
    if t1 < t0 {
        return Err(Error::Config(format!("window end {t1} precedes start {t0}")));
    }
    let days = (t1 - t0).num_days() as usize + 1;

    let mut stations: Vec<Station<'_>> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for r in records {
        let k = *index.entry(r.station_id.as_str()).or_insert_with(|| {
            stations.push(Station {
                id: &r.station_id,
                x: r.x,
                y: r.y,
                days: vec![None; days],
                seen: vec![false; days],
                duplicate: None,
            });
            stations.len() - 1
        });
        if r.date < t0 || r.date > t1 {
            continue;
        }
        let st = &mut stations[k];
        let d = (r.date - t0).num_days() as usize;
        if st.seen[d] {
            st.duplicate.get_or_insert(r.date);
            continue;
        }
        st.seen[d] = true;
        if let Some(v) = r.value {
            st.days[d] = Some(scheme.state_of(v)?);
        }
    }

    let mut locations = Vec::new();
    let mut groups = Vec::new();
    let mut dropped = Vec::new();
    for st in &stations {
        match station_path(st, t0, opts.gap_tolerance) {
            Ok(path) => {
                locations.push(Location::new(st.id, st.x, st.y));
                groups.push(vec![Individual::new(st.id, path)]);
            }
            Err(e) if lenient => {
                log::warn!("dropping station `{}`: {e}", st.id);
                dropped.push((st.id.to_string(), e));
            }
            Err(e) => return Err(e),
        }
    }
    let dataset = SpatialDataset::new(scheme.state_space().clone(), days as f64, locations, groups)?;
    Ok(Discretized {
        dataset,
        dropped,
        start: t0,
    })
}
