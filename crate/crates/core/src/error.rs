use std::path::PathBuf;

use thiserror::Error;

/// Failures of the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value in {what} at flat index {index}")]
    NonFinite { what: &'static str, index: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("mode band {band:?} exceeds available modes {available:?}")]
    BandExceedsGrid { band: Vec<usize>, available: Vec<usize> },
    #[error("blow-up at t = {t}: {norm} = {value:e} exceeds threshold {threshold:e}")]
    BlowUp {
        t: f64,
        norm: &'static str,
        value: f64,
        threshold: f64,
    },
    #[error("non-finite state at t = {t} after step {step}")]
    NonFiniteState { t: f64, step: usize },
    #[error("inadmissible Gagliardo-Nirenberg parameters: {0}")]
    Inadmissible(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("malformed snapshot: {0}")]
    Snapshot(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
