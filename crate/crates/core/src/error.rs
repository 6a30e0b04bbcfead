//! Crate-wide error type.

/// Errors produced by parsing, validation, and pipeline contracts.
///
/// The CLI maps `Parse`/`Validation`/`Contract` to exit status 1 and `Io`
/// to exit status 2.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input document could not be parsed at all.
    #[error("parse error: {0}")]
    Parse(String),

    /// Input parsed but violates a documented invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// An API was called outside its contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Underlying file or stream failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
