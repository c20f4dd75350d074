use std::path::PathBuf;
use thiserror::Error;

/// Crate-wide error type.
///
/// Variants are grouped so a front end can map them to coarse exit codes:
/// configuration/usage problems, data problems (I/O, formats, manifests),
/// and numeric failures inside the solver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("dimension mismatch: {context} ({left} vs {right})")]
    DimensionMismatch {
        context: String,
        left: String,
        right: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("missing flow for frame pair ({from}, {to})")]
    MissingFlow { from: usize, to: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl Error {
    pub fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn dims(context: impl Into<String>, left: impl ToString, right: impl ToString) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
            left: left.to_string(),
            right: right.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
