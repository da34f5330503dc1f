use thiserror::Error;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("answer token `{token}` is not among the top-{window} logprobs returned by `{model}`")]
    TokenNotInTopLogprobs { model: String, token: String, window: usize },
    #[error("answer token `{token}` is not a single token for `{model}` ({pieces} pieces)")]
    MultiTokenAnswer { model: String, token: String, pieces: usize },
    #[error("network error after {attempts} attempt(s): {message}")]
    Network { attempts: u32, message: String },
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("unknown chat template `{0}`")]
    TemplateUnknown(String),
    #[error("unexpected response: {0}")]
    InvalidResponse(String),
    #[error("`{0}` does not support text generation")]
    GenerationUnsupported(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl GatewayError {
    /// Transient failures worth another attempt.
    pub fn is_retryable(&self) -> bool {
        match self {
            GatewayError::Network { .. } => true,
            GatewayError::Http { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, GatewayError>;
