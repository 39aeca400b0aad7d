use thiserror::Error;

/// Errors raised by protocol operations.
///
/// A failed verification is a verdict, not an error; these variants are for
/// malformed inputs and broken preconditions.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("malformed encoding: {0}")]
    Decode(&'static str),
    #[error("degenerate group element: {0}")]
    IdentityPoint(&'static str),
    #[error("invalid system parameters: {0}")]
    InvalidParams(String),
    #[error("message must be {expected} bytes, got {actual}")]
    MessageLength { expected: usize, actual: usize },
    #[error("real identity must be {expected} bytes, got {actual}")]
    IdentityLength { expected: usize, actual: usize },
    #[error("pseudo-ID is not valid at timestamp {0}")]
    PseudonymExpired(u64),
    #[error("partial key failed the validity equation")]
    PartialKeyInvalid,
    #[error("certificate does not verify under the master public key")]
    CertificateInvalid,
    #[error("pseudo-ID was not issued under this trace key")]
    TraceMismatch,
    #[error("batch is empty")]
    EmptyBatch,
}

pub type Result<T> = std::result::Result<T, Error>;
