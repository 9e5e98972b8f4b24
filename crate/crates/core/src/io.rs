//! CSV formats for locations and long-format trajectories.
//!
//! * locations: `location_id,x,y`
//! * trajectories: `id,location_id,time,state`, one row per jump plus a
//!   closing row per individual at `time = T` restating the last state.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fmca::Encoding;
use crate::trajectory::{Individual, Location, SpatialDataset, StatePath, StateSpace};

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input)
}

fn parse_error(source: &str, err: csv::Error) -> Error {
    let line = err.position().map_or(0, |p| p.line());
    Error::Parse {
        path: source.to_string(),
        line,
        message: err.to_string(),
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("cannot open {}: {e}", path.display()),
        ))
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct LocationRecord {
    location_id: String,
    x: f64,
    y: f64,
}

pub fn parse_locations<R: Read>(input: R, source: &str) -> Result<Vec<Location>> {
    let mut rdr = reader(input);
    let mut out = Vec::new();
    for rec in rdr.deserialize::<LocationRecord>() {
        let rec = rec.map_err(|e| parse_error(source, e))?;
        out.push(Location::new(rec.location_id, rec.x, rec.y));
    }
    Ok(out)
}

pub fn read_locations(path: impl AsRef<Path>) -> Result<Vec<Location>> {
    let path = path.as_ref();
    parse_locations(open(path)?, &path.display().to_string())
}

pub fn write_locations<W: Write>(locations: &[Location], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    for loc in locations {
        wtr.serialize(LocationRecord {
            location_id: loc.id.clone(),
            x: loc.x,
            y: loc.y,
        })
        .map_err(|e| parse_error("<output>", e))?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct TrajectoryRecord {
    id: String,
    location_id: String,
    time: f64,
    state: String,
}

/// Reads long-format trajectories onto `locations`.
///
/// With `state_space = None` the states are the distinct labels in sorted
/// order.
pub fn parse_trajectories<R: Read>(
    input: R,
    source: &str,
    locations: Vec<Location>,
    state_space: Option<StateSpace>,
) -> Result<SpatialDataset> {
    struct Pending {
        location: usize,
        rows: Vec<(f64, String, u64)>,
    }

    let loc_index: HashMap<&str, usize> = locations
        .iter()
        .enumerate()
        .map(|(i, l)| (l.id.as_str(), i))
        .collect();
    let mut rdr = reader(input);
    let headers = rdr.headers().map_err(|e| parse_error(source, e))?.clone();
    let mut order: Vec<String> = Vec::new();
    let mut pending: HashMap<String, Pending> = HashMap::new();
    let mut raw = csv::StringRecord::new();
    while rdr.read_record(&mut raw).map_err(|e| parse_error(source, e))? {
        let line = raw.position().map_or(0, |p| p.line());
        let rec: TrajectoryRecord = raw
            .deserialize(Some(&headers))
            .map_err(|e| parse_error(source, e))?;
        let fail = |message: String| Error::Parse {
            path: source.to_string(),
            line,
            message,
        };
        let &location = loc_index
            .get(rec.location_id.as_str())
            .ok_or_else(|| fail(format!("unknown location `{}`", rec.location_id)))?;
        let entry = pending.entry(rec.id.clone()).or_insert_with(|| {
            order.push(rec.id.clone());
            Pending { location, rows: Vec::new() }
        });
        if entry.location != location {
            return Err(fail(format!("individual `{}` appears at two locations", rec.id)));
        }
        entry.rows.push((rec.time, rec.state, line));
    }

    let space = match state_space {
        Some(s) => s,
        None => {
            let mut labels: Vec<&str> = pending
                .values()
                .flat_map(|p| p.rows.iter().map(|r| r.1.as_str()))
                .collect();
            labels.sort_unstable();
            labels.dedup();
            StateSpace::new(labels)?
        }
    };

    let mut groups: Vec<Vec<Individual>> = vec![Vec::new(); locations.len()];
    let mut horizon: Option<f64> = None;
    for id in order {
        let p = pending.remove(&id).expect("every ordered id is pending");
        let &(t_end, _, end_line) = &p.rows[p.rows.len() - 1];
        match horizon {
            None => horizon = Some(t_end),
            Some(h) if h != t_end => {
                return Err(Error::MismatchedHorizon {
                    expected: h,
                    found: t_end,
                })
            }
            _ => {}
        }
        let mut segments = Vec::with_capacity(p.rows.len());
        for (t, label, line) in &p.rows {
            let state = space.index_of(label).ok_or_else(|| Error::Parse {
                path: source.to_string(),
                line: *line,
                message: format!("state `{label}` is not in the state space"),
            })?;
            segments.push((*t, state));
        }
        let path = StatePath::new(segments, t_end).map_err(|e| match e {
            Error::InvalidPath { reason, .. } => Error::InvalidPath {
                individual: Some(format!("{id} (ending line {end_line})")),
                reason,
            },
            other => other,
        })?;
        groups[p.location].push(Individual::new(id, path));
    }
    let horizon = horizon.ok_or_else(|| Error::EmptyDataset("no trajectory rows".into()))?;
    SpatialDataset::new(space, horizon, locations, groups)
}

pub fn read_trajectories(
    path: impl AsRef<Path>,
    locations: Vec<Location>,
    state_space: Option<StateSpace>,
) -> Result<SpatialDataset> {
    let path = path.as_ref();
    parse_trajectories(open(path)?, &path.display().to_string(), locations, state_space)
}

pub fn write_trajectories<W: Write>(dataset: &SpatialDataset, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    let space = dataset.state_space();
    for (k, ind) in dataset.iter_individuals() {
        let loc = &dataset.locations()[k].id;
        let segs = ind.path.segments();
        for seg in segs {
            wtr.serialize(TrajectoryRecord {
                id: ind.id.clone(),
                location_id: loc.clone(),
                time: seg.start,
                state: space.label(seg.state).to_string(),
            })
            .map_err(|e| parse_error("<output>", e))?;
        }
        let last = segs.last().expect("paths are non-empty");
        wtr.serialize(TrajectoryRecord {
            id: ind.id.clone(),
            location_id: loc.clone(),
            time: dataset.horizon(),
            state: space.label(last.state).to_string(),
        })
        .map_err(|e| parse_error("<output>", e))?;
    }
    wtr.flush()?;
    Ok(())
}

/// `component,eigenvalue,explained_cum` for every retained eigenvalue.
pub fn write_eigen_csv<W: Write>(encoding: &Encoding, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["component", "eigenvalue", "explained_cum"])
        .map_err(std::io::Error::from)?;
    for (m, (l, e)) in encoding.eigenvalues.iter().zip(&encoding.explained).enumerate() {
        wtr.write_record([(m + 1).to_string(), l.to_string(), e.to_string()])
            .map_err(std::io::Error::from)?;
    }
    wtr.flush()?;
    Ok(())
}

/// One row per individual: `individual,location_id,{prefix}1..{prefix}M`.
pub fn write_matrix_csv<W: Write>(dataset: &SpatialDataset, values: &DMatrix<f64>, prefix: &str, out: W) -> Result<()> {
    if values.nrows() != dataset.n_individuals() {
        return Err(Error::DimensionMismatch {
            expected: dataset.n_individuals(),
            found: values.nrows(),
        });
    }
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["individual".to_string(), "location_id".to_string()];
    header.extend((1..=values.ncols()).map(|m| format!("{prefix}{m}")));
    wtr.write_record(&header).map_err(std::io::Error::from)?;
    for (i, (k, ind)) in dataset.iter_individuals().enumerate() {
        let mut row = vec![ind.id.clone(), dataset.locations()[k].id.clone()];
        row.extend(values.row(i).iter().map(|v| v.to_string()));
        wtr.write_record(&row).map_err(std::io::Error::from)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Location ids from a file (one per line or comma separated, optional
/// `location_id` header) or, if `spec` is not a file, from the comma
/// separated string itself.
pub fn read_id_list(spec: &str) -> Result<Vec<String>> {
    let text = if Path::new(spec).is_file() {
        std::fs::read_to_string(spec)?
    } else {
        spec.to_string()
    };
    Ok(text
        .split([',', '\n', '\r'])
        .map(str::trim)
        .filter(|s| !s.is_empty() && *s != "location_id" && !s.starts_with('#'))
        .map(String::from)
        .collect())
}
