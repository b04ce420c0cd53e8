use alloc::string::String;

/// Errors produced by the numerical routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("non-finite value while evaluating at x = {x}")]
    Evaluation { x: f64 },
    #[error("series truncation needs {required} terms, more than the cap of {max_terms}")]
    TruncationFailure { required: usize, max_terms: usize },
    #[error("lattice cutoff too small: row {row} omits mass {defect:e}, above {tail_eps:e}")]
    CutoffTooSmall { row: usize, defect: f64, tail_eps: f64 },
    #[error("unsupported method: {0}")]
    UnsupportedMethod(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
