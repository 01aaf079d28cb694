use thiserror::Error;

/// Errors raised anywhere in the retrofitting pipeline.
#[derive(Debug, Error)]
pub enum BboxError {
    #[error("budget must be at least 1")]
    ZeroBudget,

    #[error("trace integrity violated at step {step}: choice {choice} outside 1..={k}")]
    ChoiceOutOfRange { step: usize, choice: u32, k: u32 },

    #[error("non-finite candidate proposed at step {step}")]
    NonFinite { step: usize },

    #[error("trace truncated: {records} records for budget {budget}")]
    TruncatedTrace { records: usize, budget: usize },

    #[error("trace corrupted at step {step}: {reason}")]
    CorruptTrace { step: usize, reason: String },

    #[error("unknown algorithm id `{0}` (valid: {valid})", valid = crate::optimizers::AlgorithmId::valid_ids())]
    UnknownAlgorithm(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("invalid trace: {0}")]
    Validation(String),

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, BboxError>;
