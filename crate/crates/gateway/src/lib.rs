//! Answer-token probability providers for forced-choice probes: deterministic
//! mock models, an OpenAI-compatible HTTP client, a content-addressed cache
//! and a bounded worker pool.

pub mod cache;
pub mod error;
pub mod gateway;
pub mod http;
pub mod mock;
pub mod provider;

pub use cache::{cache_key, ProbCache};
pub use error::{GatewayError, Result};
pub use gateway::Gateway;
pub use http::{HttpProvider, ModelEndpoint, RetryPolicy};
pub use mock::{MockKind, MockModel};
pub use provider::{validate_answer_tokens, ProbabilityProvider};
