use std::collections::BTreeMap;

use srcpref_core::prompt::ProbeInstance;

use crate::error::{GatewayError, Result};

/// Source of first-position answer-token probabilities.
pub trait ProbabilityProvider: Send + Sync {
    fn model_id(&self) -> &str;

    /// Probability of each option token of `probe` at the first generated
    /// position, under greedy (temperature zero) decoding.
    fn token_probs(&self, probe: &ProbeInstance) -> Result<BTreeMap<String, f64>>;

    /// Greedy decode of at most `max_tokens` tokens.
    fn generate(&self, probe: &ProbeInstance, max_tokens: usize) -> Result<String> {
        let _ = (probe, max_tokens);
        Err(GatewayError::GenerationUnsupported(self.model_id().to_string()))
    }

    /// Exact text the model sees; the cache is keyed on it.
    fn rendered_prompt(&self, probe: &ProbeInstance) -> String {
        serde_json::to_string(&probe.messages).unwrap_or_default()
    }

    /// Number of tokenizer pieces in `token`, when the provider can tell.
    fn token_pieces(&self, token: &str) -> Result<Option<usize>> {
        let _ = token;
        Ok(None)
    }
}

/// Fails unless every answer token is a single token for the provider.
/// Providers that cannot tokenize pass with a warning.
pub fn validate_answer_tokens(provider: &dyn ProbabilityProvider, tokens: &[String]) -> Result<()> {
    for t in tokens {
        match provider.token_pieces(t)? {
            Some(1) => {}
            Some(pieces) => {
                return Err(GatewayError::MultiTokenAnswer {
                    model: provider.model_id().to_string(),
                    token: t.clone(),
                    pieces,
                })
            }
            None => log::warn!("{}: cannot verify that `{t}` is a single token", provider.model_id()),
        }
    }
    Ok(())
}
