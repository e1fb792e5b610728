use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = GmilError> = std::result::Result<T, E>;

/// Every failure surfaced by the library.
///
/// Variants are grouped by the exit code the command line maps them to:
/// usage problems, data problems, and contract violations found while
/// verifying.
#[derive(Debug, Error)]
pub enum GmilError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("non-finite feature value in bag `{bag}`")]
    NonFinite { bag: String },

    #[error("bag {index}: {source}")]
    Bag {
        index: usize,
        #[source]
        source: Box<GmilError>,
    },

    #[error("too few points: {points} points for {clusters} clusters")]
    TooFewPoints { points: usize, clusters: usize },

    #[error("k-means++ seeding failed: all points coincide with the chosen centroids")]
    DegenerateSeeding,

    #[error("corrupt model: {0}")]
    CorruptModel(String),

    #[error("unsatisfiable generator spec: {0}")]
    Unsatisfiable(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl GmilError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GmilError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        GmilError::InvalidParameter(msg.into())
    }

    /// Process exit code for this error: 1 usage, 2 data, 3 contract violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            GmilError::InvalidParameter(_) => 1,
            GmilError::ContractViolation(_) => 3,
            GmilError::Bag { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}
