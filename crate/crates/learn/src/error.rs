use dyncontract_core::ContractError;

#[derive(Debug, thiserror::Error)]
pub enum LearnError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite {0}")]
    NonFinite(String),
    #[error("training diverged at step {step}: {reason}")]
    Diverged { step: usize, reason: String },
    #[error("unsupported file: {0}")]
    Format(String),
    #[error(transparent)]
    Contract(#[from] ContractError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = LearnError> = std::result::Result<T, E>;
