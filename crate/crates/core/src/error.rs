use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("length mismatch: trajectory has {trajectory} configs, path has {path} poses")]
    LengthMismatch { trajectory: usize, path: usize },
    #[error("IK did not converge within {0} iterations")]
    MaxIters(usize),
    #[error("IK diverged")]
    Diverged,
    #[error("path generation exhausted {0} retries")]
    RetryExhausted(usize),
    #[error("no collision-free start configuration at the first path pose")]
    NoStartConfig,
    #[error("demonstration set is empty")]
    EmptyDemoSet,
    #[error("policy layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
