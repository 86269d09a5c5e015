use thiserror::Error;

use crate::rate_model::ValidationReport;

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("invalid rate specification: {0}")]
    InvalidSpec(String),

    #[error("rate pair is not admissible: {0}")]
    Inadmissible(ValidationReport),

    #[error("event guard tripped after {events} events")]
    EventGuard { events: u64 },

    #[error("iteration guard tripped after {0} iterations")]
    IterationGuard(u64),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("empirical laws use different binnings")]
    BinningMismatch,

    #[error("empty sample")]
    EmptySample,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("infeasible parameters: {0}")]
    Infeasible(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
