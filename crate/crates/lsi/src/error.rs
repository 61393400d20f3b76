//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-positive variance at coordinate {index}: {value}")]
    NonPositiveVariance { index: usize, value: f64 },

    #[error("covariance is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),

    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    Divergence { epoch: usize },

    #[error("leave-one-out job failed for (seed, sample) pairs: {pairs:?}")]
    LooFailed { pairs: Vec<(u64, usize)> },

    #[error("parameter count {param_count} exceeds full-Hessian cap {cap}")]
    HessianCapExceeded { param_count: usize, cap: usize },

    #[error(
        "positive-definite repair exhausted after {attempts} attempts \
         (shifts {smallest_shift:e} ..= {largest_shift:e})"
    )]
    PdRepairExhausted {
        attempts: usize,
        smallest_shift: f64,
        largest_shift: f64,
    },

    #[error("bad magic bytes: expected \"EMB1\", got {got:?}")]
    BadMagic { got: [u8; 4] },

    #[error("truncated file: expected {expected} bytes, got {got}")]
    Truncated { expected: u64, got: u64 },

    #[error("trailing bytes after end of data: expected {expected} bytes, got {got}")]
    TrailingBytes { expected: u64, got: u64 },

    #[error("label {label} out of range at row {row} (num_classes {num_classes})")]
    LabelOutOfRange {
        row: usize,
        label: u32,
        num_classes: u32,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed results file {path}: {reason}")]
    MalformedResults { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
