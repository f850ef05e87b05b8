use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    /// An exhaustive scan would exceed its configured enumeration cap.
    #[error("enumeration cap exceeded: {what} ({value} > cap {cap})")]
    CapExceeded {
        what: &'static str,
        value: u64,
        cap: u64,
    },

    /// A bound was evaluated outside the regime where it applies.
    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("codeword length {required_n} required, got {n}")]
    CodewordTooShort { n: u64, required_n: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
