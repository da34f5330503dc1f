use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("split violation: {0}")]
    SplitViolation(String),
    #[error("missing matchup {0} vs {1} for model {2}")]
    MissingMatchup(String, String, String),
    #[error(transparent)]
    Data(#[from] srcpref_core::error::DataError),
    #[error(transparent)]
    Source(#[from] srcpref_core::error::SourceError),
    #[error(transparent)]
    Prompt(#[from] srcpref_core::error::PromptError),
    #[error(transparent)]
    Metric(#[from] srcpref_core::error::MetricError),
    #[error(transparent)]
    Mitigation(#[from] srcpref_core::error::MitigationError),
    #[error(transparent)]
    Gateway(#[from] srcpref_gateway::GatewayError),
    #[error(transparent)]
    Stats(#[from] srcpref_stats::StatsError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, RunnerError>;
