use thiserror::Error;

#[derive(Debug, Error)]
pub enum SairError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no latency samples in window")]
    NoSamples,
    #[error("pareto frontier is empty")]
    EmptyFrontier,
    #[error("point is dominated by the frontier")]
    Dominated,
    #[error("rate ratio {rate} outside [{min}, 1]")]
    RateOutOfRange { rate: f64, min: f64 },
    #[error("policy backend failed: {0}")]
    Policy(String),
    #[error("plot rendering failed: {0}")]
    Plot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, SairError>;
