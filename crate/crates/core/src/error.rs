//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("series did not converge within {max_terms} terms (last relative term {last_rel:.3e})")]
    SeriesDivergence { max_terms: usize, last_rel: f64 },

    #[error("control schedule does not cover the prediction window: {0}")]
    ScheduleCoverage(String),

    #[error("history underflow: {0}")]
    HistoryUnderflow(String),

    #[error("Riccati equation infeasible: {0}")]
    RiccatiInfeasible(String),

    #[error("gain synthesis found no certified candidate: {0}")]
    SynthesisInfeasible(String),

    #[error("augmented pair is not observable (numeric rank {rank} < {expected})")]
    NotObservable { rank: usize, expected: usize },

    #[error("simulation aborted: {0}")]
    Simulation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
