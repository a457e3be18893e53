use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, StpcaError>;

#[derive(Debug, Error)]
pub enum StpcaError {
    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("eigensolver did not converge after {iterations} iterations (last residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("no past window: t = {t} must exceed window length {wl}")]
    NoPastWindow { t: usize, wl: usize },

    #[error("recent fluctuation mean is zero at t = {t}")]
    ZeroRecentMean { t: usize },

    #[error("outcomes not sorted by time: t = {next} follows t = {prev}")]
    Ordering { prev: i64, next: i64 },

    #[error("{path}: row {row}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("duplicate entry: subject {subject}, hour {hour}, indicator {indicator}")]
    DuplicateEntry {
        subject: String,
        hour: i64,
        indicator: String,
    },

    #[error("unknown indicator in bounds file: {0}")]
    UnknownIndicator(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl StpcaError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        StpcaError::Io {
            path: path.into(),
            source,
        }
    }
}
