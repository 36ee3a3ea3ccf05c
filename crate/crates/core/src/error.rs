use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid generator: {0}")]
    InvalidGenerator(String),

    #[error("input length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("rate {0} outside the supported range [1/3, 1)")]
    RateOutOfRange(String),

    #[error("invalid probability {0}")]
    InvalidProbability(f64),

    #[error("monte carlo sample size {0} is below the minimum of {1}")]
    SampleSizeTooSmall(usize, usize),

    #[error("subset chain did not converge after {0} iterations")]
    NonConvergent(usize),

    #[error("trellis with {0} states is too large for this decoder")]
    TrellisTooLarge(usize),

    #[error("no convergence even at vanishing erasure probability")]
    BracketFailure,

    #[error("non-finite channel value at position {0}")]
    NonFinite(usize),

    #[error("invalid noise variance {0}")]
    InvalidNoiseVariance(f64),

    #[error("invalid decoder configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
