use lightcast_core::CoreError;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, IngestError>;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("invalid query: {0}")]
    Precondition(String),

    #[error("authentication rejected by {provider} (HTTP {status})")]
    Auth { provider: &'static str, status: u16 },

    #[error("{provider} returned HTTP {status}")]
    Http { provider: &'static str, status: u16 },

    #[error("request to {provider} failed: {message}")]
    Transport { provider: &'static str, message: String },

    #[error("{provider} returned no usable hours")]
    EmptyPayload { provider: &'static str },

    #[error("malformed {provider} payload: {message}")]
    MalformedPayload { provider: &'static str, message: String },

    #[error("pollutant and weather frames share no timestamps")]
    EmptyIntersection,

    #[error("fixture {path}: {source}")]
    Fixture { path: String, source: std::io::Error },

    #[error(transparent)]
    Core(#[from] CoreError),
}

impl IngestError {
    /// Failures worth retrying: transport errors, throttling and server errors.
    pub fn is_transient(&self) -> bool {
        match self {
            IngestError::Transport { .. } => true,
            IngestError::Http { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}
