use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid chain: {0}")]
    InvalidChain(String),

    #[error("stationary distribution undefined or non-unique: chain is not irreducible")]
    NotIrreducible,

    #[error("stationary iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: u64, residual: f64 },

    #[error("infinite hitting time from state {from} to state {to}")]
    InfiniteHittingTime { from: usize, to: usize },

    #[error("state index {0} out of range")]
    StateOutOfRange(usize),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("chain has no event edges")]
    NoEvents,

    #[error("invalid lifting map: {0}")]
    InvalidMap(String),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("invalid scheduler: {0}")]
    Scheduler(String),

    #[error("too few successes after warm-up ({found}, need at least {needed}); run longer")]
    TooFewSuccesses { found: usize, needed: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
