use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("region id {id} out of range for {n} regions")]
    UnknownRegion { id: usize, n: usize },

    #[error("region set is empty")]
    EmptyRegionSet,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid placement decision: {0}")]
    InvalidDecision(String),

    #[error("hash dimension {0} must be a power of two and at least 2")]
    InvalidHashDim(usize),

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("R² is undefined: actual values have zero variance")]
    ZeroVariance,

    #[error("no serving assignment meets the {threshold_ms} ms delay threshold (best achievable {min_avg_delay_ms} ms)")]
    Infeasible {
        threshold_ms: f64,
        min_avg_delay_ms: f64,
    },

    #[error("instance too large for exhaustive search: {0}")]
    InstanceTooLarge(String),

    #[error("{path}:{line}: {message}")]
    Trace {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("missing actual viewer counts for video {0}")]
    MissingActuals(String),

    #[error("unsupported model version {0}")]
    ModelVersion(u32),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
