use thiserror::Error;

/// Errors raised by the contract workbench core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContractError {
    #[error("invalid quality hyperparameters: {0}")]
    InvalidHyper(String),
    #[error("invalid edge profile: {0}")]
    InvalidProfile(String),
    #[error("invalid type ladder: {0}")]
    InvalidLadder(String),
    #[error("invalid market state: {0}")]
    InvalidMarket(String),
    #[error("rounds must be non-negative and finite, got {0}")]
    NegativeRounds(f64),
    #[error("{what} is not non-decreasing at index {index}")]
    NotMonotone { what: &'static str, index: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("type index {index} out of range 0..{k}")]
    TypeIndex { index: usize, k: usize },
    #[error("search space too large: {candidates} candidates exceed limit {limit}; use coordinate descent")]
    Intractable { candidates: u128, limit: u128 },
    #[error("invalid search grid: {0}")]
    InvalidGrid(String),
}

pub type Result<T, E = ContractError> = std::result::Result<T, E>;
