use lightcast_core::CoreError;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("regressor {0:?} missing from input")]
    MissingRegressor(String),

    #[error("need more than {needed} rows to fit, got {got}")]
    InsufficientRows { needed: usize, got: usize },

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("history tail too short: need {needed} values, got {got}")]
    ShortHistory { needed: usize, got: usize },

    #[error("horizon must start one hour after the history ({expected}), starts at {got}")]
    NotContiguous { expected: i64, got: i64 },

    #[error("feature columns do not match the training recipe: {0}")]
    ColumnMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("model document: {0}")]
    Document(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
