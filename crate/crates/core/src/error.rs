use thiserror::Error;

use crate::chaos::HyperState;

#[derive(Debug, Error)]
pub enum Error {
    #[error("trajectory diverged at step {step}: {state:?}")]
    Divergence { step: u64, state: HyperState },

    #[error("invalid key: {0}")]
    InvalidKey(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("sequence too short: need at least {min} bytes, got {actual}")]
    LengthTooShort { min: usize, actual: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::LengthMismatch { expected, actual });
    }
    Ok(())
}
