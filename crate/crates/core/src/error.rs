use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
///
/// The CLI maps these onto exit codes: input/usage problems exit with 2,
/// numerical failures with 3 (see [`Error::is_numerical`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing column `{0}` in CSV header")]
    MissingColumn(String),

    #[error("row {row}, column `{column}`: cannot parse `{cell}` as a finite number")]
    NonNumeric { row: usize, column: String, cell: String },

    #[error("time grid is not uniform: step {found} at row {row} differs from {expected}")]
    NonUniformSpacing { row: usize, expected: f64, found: f64 },

    #[error("time grids of trial 0 and trial {trial} differ")]
    GridMismatch { trial: usize },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error("objective became non-finite at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("Cholesky factorization failed with jitter up to {jitter:e}")]
    Conditioning { jitter: f64 },

    #[error("problem size {n} exceeds the direct-solve limit of {limit}; decimate the input")]
    TooLarge { n: usize, limit: usize },
}

impl Error {
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericalDegeneracy(_)
                | Error::Divergence { .. }
                | Error::Conditioning { .. }
                | Error::TooLarge { .. }
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidArgument(msg()))
    }
}
