//! OpenAI-compatible HTTP provider.
//!
//! Without a local chat template the provider calls `/chat/completions` and
//! lets the server apply its own template. With one it renders the prompt
//! locally and calls `/completions`.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use srcpref_core::chat::ChatTemplate;
use srcpref_core::prompt::ProbeInstance;

use crate::error::{GatewayError, Result};
use crate::provider::ProbabilityProvider;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 4, initial_backoff_ms: 500, max_backoff_ms: 8_000 }
    }
}

impl RetryPolicy {
    /// Delay before attempt `attempt + 1`, doubling from the initial backoff.
    pub fn backoff(&self, attempt: u32) -> Duration {
        let ms = self.initial_backoff_ms.saturating_mul(1u64 << attempt.min(20).saturating_sub(1));
        Duration::from_millis(ms.min(self.max_backoff_ms))
    }
}

fn default_parallel() -> usize {
    1
}

fn default_top_logprobs() -> usize {
    20
}

fn default_timeout() -> u64 {
    120
}

/// One model behind an HTTP endpoint. Credentials are read from the named
/// environment variable at request time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEndpoint {
    pub model_id: String,
    pub base_url: String,
    /// Model name sent to the server, when it differs from `model_id`.
    #[serde(default)]
    pub served_model: Option<String>,
    /// Local template id (`chatml`, `llama3`, `gemma3`, `olmo2`).
    #[serde(default)]
    pub chat_template: Option<String>,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_parallel")]
    pub max_parallel: usize,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default = "default_top_logprobs")]
    pub top_logprobs: usize,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    /// Full URL of a `/tokenize` endpoint used for single-token checks.
    #[serde(default)]
    pub tokenize_url: Option<String>,
}

impl ModelEndpoint {
    pub fn new(model_id: impl Into<String>, base_url: impl Into<String>) -> Self {
        Self {
            model_id: model_id.into(),
            base_url: base_url.into(),
            served_model: None,
            chat_template: None,
            api_key_env: None,
            max_parallel: 1,
            retry: RetryPolicy::default(),
            top_logprobs: default_top_logprobs(),
            timeout_secs: default_timeout(),
            tokenize_url: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_parallel < 1 {
            return Err(GatewayError::Config(format!("{}: max_parallel must be at least 1", self.model_id)));
        }
        if self.retry.max_attempts < 1 {
            return Err(GatewayError::Config(format!("{}: retry.max_attempts must be at least 1", self.model_id)));
        }
        if let Some(t) = &self.chat_template {
            t.parse::<ChatTemplate>().map_err(|_| GatewayError::TemplateUnknown(t.clone()))?;
        }
        Ok(())
    }
}

pub struct HttpProvider {
    endpoint: ModelEndpoint,
    template: Option<ChatTemplate>,
    client: reqwest::blocking::Client,
    archive: Option<PathBuf>,
}

impl HttpProvider {
    pub fn new(endpoint: ModelEndpoint, archive: Option<PathBuf>) -> Result<Self> {
        endpoint.validate()?;
        let template = match &endpoint.chat_template {
            Some(t) => Some(t.parse::<ChatTemplate>().map_err(|_| GatewayError::TemplateUnknown(t.clone()))?),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(endpoint.timeout_secs))
            .build()
            .map_err(|e| GatewayError::Config(e.to_string()))?;
        if let Some(dir) = &archive {
            fs::create_dir_all(dir)?;
        }
        Ok(Self { endpoint, template, client, archive })
    }

    pub fn endpoint(&self) -> &ModelEndpoint {
        &self.endpoint
    }

    fn served_model(&self) -> &str {
        self.endpoint.served_model.as_deref().unwrap_or(&self.endpoint.model_id)
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.endpoint.base_url.trim_end_matches('/'), path)
    }

    fn post(&self, url: &str, body: &Value) -> Result<Value> {
        let mut req = self.client.post(url).json(body);
        if let Some(var) = &self.endpoint.api_key_env {
            let key = std::env::var(var)
                .map_err(|_| GatewayError::Config(format!("environment variable `{var}` is not set")))?;
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| GatewayError::Network { attempts: 1, message: e.to_string() })?;
        let status = resp.status().as_u16();
        let text = resp.text().map_err(|e| GatewayError::Network { attempts: 1, message: e.to_string() })?;
        self.archive_exchange(body, status, &text)?;
        if !(200..300).contains(&status) {
            return Err(GatewayError::Http { status, body: text });
        }
        Ok(serde_json::from_str(&text)?)
    }

    fn archive_exchange(&self, request: &Value, status: u16, response: &str) -> Result<()> {
        let Some(dir) = &self.archive else { return Ok(()) };
        let req = serde_json::to_string(request)?;
        let name = hex::encode(Sha256::digest(req.as_bytes()));
        let record = json!({ "request": request, "status": status, "response": response });
        fs::write(dir.join(format!("{}.json", &name[..32])), serde_json::to_vec_pretty(&record)?)?;
        Ok(())
    }

    fn request_body(&self, probe: &ProbeInstance, max_tokens: usize, logprobs: bool) -> (String, Value) {
        match self.template {
            None => {
                let mut body = json!({
                    "model": self.served_model(),
                    "messages": probe.messages,
                    "max_tokens": max_tokens,
                    "temperature": 0,
                });
                if logprobs {
                    body["logprobs"] = json!(true);
                    body["top_logprobs"] = json!(self.endpoint.top_logprobs);
                }
                (self.url("chat/completions"), body)
            }
            Some(t) => {
                let mut body = json!({
                    "model": self.served_model(),
                    "prompt": t.render(&probe.messages),
                    "max_tokens": max_tokens,
                    "temperature": 0,
                });
                if logprobs {
                    body["logprobs"] = json!(self.endpoint.top_logprobs);
                }
                (self.url("completions"), body)
            }
        }
    }
}

/// Token → logprob at the first generated position of either response shape.
pub fn first_position_logprobs(response: &Value) -> Result<Vec<(String, f64)>> {
    let choice = response
        .pointer("/choices/0")
        .ok_or_else(|| GatewayError::InvalidResponse("no choices".into()))?;
    if let Some(top) = choice.pointer("/logprobs/content/0/top_logprobs").and_then(Value::as_array) {
        return top
            .iter()
            .map(|e| {
                let tok = e.get("token").and_then(Value::as_str);
                let lp = e.get("logprob").and_then(Value::as_f64);
                match (tok, lp) {
                    (Some(t), Some(l)) => Ok((t.to_string(), l)),
                    _ => Err(GatewayError::InvalidResponse(format!("malformed top_logprobs entry {e}"))),
                }
            })
            .collect();
    }
    if let Some(top) = choice.pointer("/logprobs/top_logprobs/0").and_then(Value::as_object) {
        return top
            .iter()
            .map(|(t, l)| {
                l.as_f64()
                    .map(|l| (t.clone(), l))
                    .ok_or_else(|| GatewayError::InvalidResponse(format!("non-numeric logprob for `{t}`")))
            })
            .collect();
    }
    Err(GatewayError::InvalidResponse("response carries no first-position logprobs".into()))
}

impl ProbabilityProvider for HttpProvider {
    fn model_id(&self) -> &str {
        &self.endpoint.model_id
    }

    fn token_probs(&self, probe: &ProbeInstance) -> Result<BTreeMap<String, f64>> {
        let (url, body) = self.request_body(probe, 1, true);
        let resp = self.post(&url, &body)?;
        let top = first_position_logprobs(&resp)?;
        let mut out = BTreeMap::new();
        for o in &probe.options {
            let lp = top.iter().find(|(t, _)| *t == o.token).map(|(_, l)| *l).ok_or_else(|| {
                GatewayError::TokenNotInTopLogprobs {
                    model: self.endpoint.model_id.clone(),
                    token: o.token.clone(),
                    window: self.endpoint.top_logprobs,
                }
            })?;
            out.insert(o.token.clone(), lp.exp());
        }
        Ok(out)
    }

    fn generate(&self, probe: &ProbeInstance, max_tokens: usize) -> Result<String> {
        let (url, body) = self.request_body(probe, max_tokens, false);
        let resp = self.post(&url, &body)?;
        resp.pointer("/choices/0/message/content")
            .or_else(|| resp.pointer("/choices/0/text"))
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| GatewayError::InvalidResponse("no generated text".into()))
    }

    fn rendered_prompt(&self, probe: &ProbeInstance) -> String {
        match self.template {
            Some(t) => t.render(&probe.messages),
            None => serde_json::to_string(&probe.messages).unwrap_or_default(),
        }
    }

    fn token_pieces(&self, token: &str) -> Result<Option<usize>> {
        let Some(url) = &self.endpoint.tokenize_url else { return Ok(None) };
        let body = json!({ "model": self.served_model(), "prompt": token, "add_special_tokens": false });
        let resp = self.post(url, &body)?;
        let n = resp
            .get("tokens")
            .and_then(Value::as_array)
            .map(Vec::len)
            .or_else(|| resp.get("count").and_then(Value::as_u64).map(|c| c as usize))
            .ok_or_else(|| GatewayError::InvalidResponse("tokenize response lacks `tokens`".into()))?;
        Ok(Some(n))
    }
}
