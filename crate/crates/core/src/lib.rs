//! Spatial scan statistic for categorical functional data.
//!
//! Categorical trajectories are encoded into real scores by functional
//! multiple correspondence analysis, turned into affine-invariant spatial
//! ranks, and scanned over circular windows; significance comes from a
//! random-labelling permutation test.

pub mod basis;
pub mod config;
pub mod error;
pub mod fixtures;
pub mod fmca;
pub mod ingest;
pub mod io;
pub mod rank;
pub mod report;
pub mod scan;
pub mod simulate;
pub mod study;
pub mod trajectory;

pub use nalgebra;

pub use basis::{Basis, BasisKind, BasisSpec};
pub use config::RunConfig;
pub use error::{Error, Result};
pub use fmca::{DesignMatrices, Encoding};
pub use rank::RankSet;
pub use scan::{run_scan, ScanConfig, ScanResult, Window, WindowSet};
pub use simulate::{Scenario, ScenarioSpec};
pub use trajectory::{Individual, Location, SpatialDataset, StatePath, StateSpace};
