//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Underlying filesystem failure.
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Byte-level structure of a file is not what its format requires.
    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    /// File parses but its declared structure does not match the expected schema.
    #[error("schema error in {path}: {reason}")]
    Schema { path: PathBuf, reason: String },

    /// Values violate a domain invariant.
    #[error("data error: {0}")]
    Data(String),

    /// Caller passed an argument outside an operation's domain.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Duplicate model id in a prediction record set.
    #[error("duplicate model id: {0}")]
    Duplicate(String),

    /// Transition estimation is impossible because a class never occurs.
    #[error("estimation error: class {class} absent from clean labels")]
    Estimation { class: usize },

    /// Radius calibration found no radius within tolerance; carries the
    /// bracketing (radius, rate) probes.
    #[error(
        "calibration failed: no radius within tolerance; bracketed by \
         (r={:.6}, rate={:.6}) and (r={:.6}, rate={:.6})",
        below.0, below.1, above.0, above.1
    )]
    Calibration {
        below: (f64, f64),
        above: (f64, f64),
    },

    /// A learner diverged during training.
    #[error("learner error in {model_id}: {reason}")]
    Learner { model_id: String, reason: String },

    /// Numerical failure in an iterative routine.
    #[error("numerical error at iteration {iteration}: {reason}")]
    Numerical { iteration: usize, reason: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn schema(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
