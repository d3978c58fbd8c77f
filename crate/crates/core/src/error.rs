use crate::game::Coalition;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("exact enumeration over {players} players exceeds the limit of {limit}; use a sampled estimator")]
    BudgetExceeded { players: usize, limit: usize },

    #[error("evaluation failed on coalition {coalition:?}: {reason}")]
    Evaluation { coalition: Coalition, reason: String },

    #[error("unit {unit_id} has a zero-norm feature vector")]
    ZeroNorm { unit_id: u64 },

    #[error("degenerate normalization: |sum| = {sum:e} is below the floor {floor:e}")]
    DegenerateNormalization { sum: f64, floor: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
