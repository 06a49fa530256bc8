use thiserror::Error;

/// Errors raised by the hitlab computations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum HitError {
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("invalid word: {0}")]
    InvalidWord(String),
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("invalid point: {0}")]
    InvalidPoint(String),
    #[error("invalid hole: {0}")]
    InvalidHole(String),
    #[error("{what}: {requested} exceeds the cap of {cap}")]
    CapExceeded {
        what: &'static str,
        requested: u128,
        cap: u128,
    },
    #[error("no convergence: {0}")]
    NonConvergence(String),
    #[error("degenerate hole: {0}")]
    Degenerate(String),
    #[error("point is not periodic: {0}")]
    NotPeriodic(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, HitError>;
