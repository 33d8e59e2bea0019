use thiserror::Error;

/// Error type shared across the solver crates.
#[derive(Debug, Error)]
pub enum Error {
    /// A geometric or numerical precondition was violated by the caller.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// A run configuration could not be parsed or validated.
    #[error("config error: {0}")]
    Config(String),
    /// The field stopped being finite, usually a sign of an unstable setup.
    #[error("non-finite field value at step {step} (t = {t})")]
    NonFinite { step: u64, t: f64 },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
