use thiserror::Error;

/// Errors raised by the coupling and factor constructions.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDist(String),

    #[error("alphabet mismatch: {left} vs {right}")]
    AlphabetMismatch { left: usize, right: usize },

    #[error("invalid relation: {0}")]
    InvalidRelation(String),

    #[error("invalid coupling: {0}")]
    InvalidCoupling(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("conditioning event has zero probability: {0}")]
    NullConditioning(String),

    #[error("alphabets are not comparable: {0}")]
    Incomparable(String),

    #[error("support budget exceeded: need {needed}, budget {budget} ({what})")]
    Budget {
        what: String,
        needed: u128,
        budget: u128,
    },

    #[error("degenerate construction: {0}")]
    Degenerate(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("parameter search exhausted; binding constraint: {0}")]
    SearchExhausted(String),

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
