use thiserror::Error;

/// Errors raised by the simulator and its policies.
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument outside its admissible range (e.g. a load outside [0, 1]).
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid call or configuration: unknown ids, mismatched dimensions, bad parameters.
    #[error("usage error: {0}")]
    Usage(String),

    /// Malformed input data.
    #[error("format error: {0}")]
    Format(String),

    /// An internal invariant was broken. Seeing this means there is a bug.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
