use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised across the pipeline.
///
/// The variants group into three families that the CLI maps onto exit
/// codes: usage problems (bad parameters), data problems (unreadable or
/// malformed inputs) and numerical failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("node {node} has zero degree")]
    ZeroDegree { node: usize },

    #[error(
        "only {found} stable equilibrium points found but {requested} clusters requested; \
         increase the kernel width q (--kernel-q) or raise the aggregation threshold"
    )]
    TooFewSeps { found: usize, requested: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the caller's parameters rather than the data.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::InvalidParameter(_))
    }

    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical(_) | Error::ZeroDegree { .. } | Error::TooFewSeps { .. }
        )
    }
}
