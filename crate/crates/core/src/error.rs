use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state space: {0}")]
    InvalidStateSpace(String),

    #[error("invalid path{}: {reason}", individual.as_ref().map(|id| format!(" for individual `{id}`")).unwrap_or_default())]
    InvalidPath {
        individual: Option<String>,
        reason: String,
    },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("path horizon {found} does not match dataset horizon {expected}")]
    MismatchedHorizon { expected: f64, found: f64 },

    #[error("time {t} outside the domain [0, {horizon}]")]
    TimeOutOfDomain { t: f64, horizon: f64 },

    #[error("invalid basis specification: {0}")]
    InvalidBasisSpec(String),

    #[error("design matrix G is singular even after pruning and ridge regularisation")]
    SingularDesign,

    #[error("no variation: all non-trivial eigenvalues are negligible")]
    NoVariation,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("rank transform did not converge within {max_iter} iterations (residual {residual:.3e})")]
    TylerNonconvergence { max_iter: usize, residual: f64 },

    #[error("degenerate scores: all score vectors are identical")]
    DegenerateScores,

    #[error("degenerate ranks: the sum of squared ranks is zero")]
    DegenerateRanks,

    #[error("no candidate windows satisfy the cluster size bounds")]
    NoCandidateWindows,

    #[error("cluster location `{0}` is not part of the geometry")]
    UnknownClusterLocation(String),

    #[error("negative concentration value {0}")]
    NegativeValue(f64),

    #[error("invalid categorization scheme: {0}")]
    InvalidScheme(String),

    #[error("station `{station}`: {missing} consecutive missing days starting {start} exceed the gap tolerance {tolerance}")]
    MissingDays {
        station: String,
        start: String,
        missing: usize,
        tolerance: usize,
    },

    #[error("station `{station}`: duplicate record for {date}")]
    DuplicateTimestamps { station: String, date: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid_path(reason: impl Into<String>) -> Self {
        Error::InvalidPath {
            individual: None,
            reason: reason.into(),
        }
    }

    pub(crate) fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, skipping stage labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}
