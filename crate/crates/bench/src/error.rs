use thiserror::Error;

pub type Result<T> = std::result::Result<T, BenchError>;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("stage {stage} failed: {cause}")]
    Stage { stage: String, cause: String },

    #[error("writing {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl BenchError {
    pub fn stage(stage: impl Into<String>, cause: impl std::fmt::Display) -> Self {
        BenchError::Stage { stage: stage.into(), cause: cause.to_string() }
    }
}

/// Tags an error with the pipeline stage it came from.
pub(crate) trait StageExt<T> {
    fn stage(self, stage: &str) -> Result<T>;
}

impl<T, E: std::fmt::Display> StageExt<T> for std::result::Result<T, E> {
    fn stage(self, stage: &str) -> Result<T> {
        self.map_err(|e| BenchError::stage(stage, e))
    }
}
