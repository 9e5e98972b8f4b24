//! TOML run configuration shared by the CLI subcommands.
//!
//! ```toml
//! basis.kind = "bspline"   # or "fourier"
//! basis.size = 10
//! basis.degree = 3
//! variance_threshold = 0.9
//! permutations = 999
//! seed = 1
//! significance = 0.05
//! gap_tolerance = 2
//! scheme = "atmo.csv"      # optional; Atmo thresholds otherwise
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::basis::BasisSpec;
use crate::error::{Error, Result};
use crate::fmca::DEFAULT_VARIANCE_THRESHOLD;
use crate::ingest::DEFAULT_GAP_TOLERANCE;
use crate::scan::ScanConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub basis: BasisSpec,
    pub variance_threshold: f64,
    pub permutations: usize,
    pub seed: u64,
    pub significance: f64,
    pub gap_tolerance: usize,
    pub scheme: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            basis: BasisSpec::default(),
            variance_threshold: DEFAULT_VARIANCE_THRESHOLD,
            permutations: 999,
            seed: 1,
            significance: 0.05,
            gap_tolerance: DEFAULT_GAP_TOLERANCE,
            scheme: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// A relative `scheme` path is resolved against the config file's
    /// directory.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        if let (Some(scheme), Some(dir)) = (cfg.scheme.as_mut(), path.parent()) {
            if scheme.is_relative() {
                *scheme = dir.join(&*scheme);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.variance_threshold > 0.0 && self.variance_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "variance_threshold must lie in (0, 1], got {}",
                self.variance_threshold
            )));
        }
        if self.permutations == 0 {
            return Err(Error::Config("permutations must be at least 1".into()));
        }
        if !(self.significance > 0.0 && self.significance < 1.0) {
            return Err(Error::Config(format!("significance must lie in (0, 1), got {}", self.significance)));
        }
        Ok(())
    }

    pub fn scan_config(&self) -> ScanConfig {
        ScanConfig {
            basis: self.basis,
            variance_threshold: self.variance_threshold,
            permutations: self.permutations,
            seed: self.seed,
            ..ScanConfig::default()
        }
    }
}
