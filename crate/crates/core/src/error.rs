use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid quantile levels: {0}")]
    InvalidLevels(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite {what} in layer {layer}")]
    NonFiniteGradient { what: &'static str, layer: usize },

    #[error("training diverged at iteration {iteration}: objective is {value}")]
    Diverged { iteration: usize, value: f64 },

    #[error("reference quantile score must be positive, got {0}")]
    UndefinedReference(f64),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: duplicated timestamp {timestamp} at line {line}")]
    DuplicateTimestamp {
        path: PathBuf,
        line: usize,
        timestamp: String,
    },

    #[error("insufficient history: first feasible test month is {first_feasible}")]
    InsufficientHistory { first_feasible: String },

    #[error("quantile level grid mismatch: {0}")]
    LevelMismatch(String),

    #[error("forecast and truth misaligned at timestamp {0}")]
    Misaligned(String),

    #[error("model file: {0}")]
    Model(String),

    #[error("{path}: {source}")]
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
