use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the sensing, recovery and experiment layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("exhaustive projection limited to n <= {max_n} and s <= {max_s} (got n = {n}, s = {s})")]
    DimensionTooLarge {
        n: usize,
        s: usize,
        max_n: usize,
        max_s: usize,
    },

    #[error("estimate is the zero matrix and cannot be normalized")]
    ZeroEstimate,

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed data: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn mismatch(expected: impl ToString, actual: impl ToString) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    /// True for failures caused by the filesystem rather than by the inputs.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
