use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// An input fell outside a model's validity window.
    #[error("{axis} {value} outside valid range [{min}, {max}] of `{model}`")]
    Range {
        model: String,
        axis: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown material `{0}`")]
    UnknownMaterial(String),

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    Shape {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("eigensolver did not converge after {iterations} Lanczos steps (worst residual {worst_residual:.3e}, tolerance {tolerance:.1e})")]
    Solver {
        iterations: usize,
        worst_residual: f64,
        tolerance: f64,
    },

    #[error("inner linear solve stalled after {iterations} iterations (relative residual {residual:.3e})")]
    InnerSolve { iterations: usize, residual: f64 },

    /// The requested operating point is outside the regime the model describes.
    #[error("model validity: {0}")]
    ModelValidity(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed cache entry {path}: {reason}")]
    Cache { path: PathBuf, reason: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
