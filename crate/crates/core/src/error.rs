//! Shared error type for the crate.

use thiserror::Error;

/// Errors surfaced by selection, metrics, regression and IO routines.
///
/// The CLI maps these onto exit codes: parameter/parse/guard errors are
/// usage errors (exit 2), everything else is a runtime error (exit 1).
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input data; `line` is 1-based and counts every line of the
    /// file, including a header line if present.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A caller-supplied parameter is outside its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Structurally valid input on which the requested quantity is undefined
    /// (empty evaluation complement, zero adaptive radius, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Numerical failure (e.g. a linear solve that does not meet its
    /// residual bound after jitter escalation).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A combinatorial guard refused to run an exhaustive computation.
    #[error("refused: {0}")]
    Refused(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors the CLI treats as usage errors (exit code 2).
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::InvalidParameter(_) | Error::Refused(_)
        )
    }
}
