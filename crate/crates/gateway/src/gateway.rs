use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, OnceLock};
use std::thread;
use std::time::Instant;

use srcpref_core::prompt::ProbeInstance;
use srcpref_core::results::{ProbeResult, TransportMeta};

use crate::cache::{cache_key, ProbCache};
use crate::error::{GatewayError, Result};
use crate::http::RetryPolicy;
use crate::provider::{validate_answer_tokens, ProbabilityProvider};

/// Cached, retrying, bounded-parallel access to one provider.
#[derive(Clone)]
pub struct Gateway {
    provider: Arc<dyn ProbabilityProvider>,
    cache: Option<Arc<ProbCache>>,
    max_parallel: usize,
    retry: RetryPolicy,
}

impl Gateway {
    pub fn new(provider: Arc<dyn ProbabilityProvider>) -> Self {
        Self { provider, cache: None, max_parallel: 1, retry: RetryPolicy::default() }
    }

    pub fn with_cache(mut self, cache: Arc<ProbCache>) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_parallelism(mut self, max_parallel: usize) -> Self {
        self.max_parallel = max_parallel.max(1);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn model_id(&self) -> &str {
        self.provider.model_id()
    }

    pub fn provider(&self) -> &dyn ProbabilityProvider {
        self.provider.as_ref()
    }

    fn with_retries<T>(&self, mut call: impl FnMut() -> Result<T>) -> Result<(T, u32)> {
        let mut attempt = 0;
        loop {
            attempt += 1;
            match call() {
                Ok(v) => return Ok((v, attempt - 1)),
                Err(e) if e.is_retryable() && attempt < self.retry.max_attempts => {
                    log::debug!("{}: attempt {attempt} failed: {e}", self.model_id());
                    thread::sleep(self.retry.backoff(attempt));
                }
                Err(GatewayError::Network { message, .. }) => {
                    return Err(GatewayError::Network { attempts: attempt, message })
                }
                Err(e) => return Err(e),
            }
        }
    }

    pub fn get_token_probs(&self, probe: &ProbeInstance) -> Result<ProbeResult> {
        let start = Instant::now();
        let tokens: Vec<String> = probe.options.iter().map(|o| o.token.clone()).collect();
        let key = cache_key(self.model_id(), &self.provider.rendered_prompt(probe), &tokens);
        if let Some(cache) = &self.cache {
            if let Some(raw) = cache.get(&key)? {
                let meta = TransportMeta { latency_ms: start.elapsed().as_millis() as u64, retries: 0, cache_hit: true };
                return Ok(ProbeResult::new(probe, self.model_id(), raw, meta));
            }
        }
        let (raw, retries) = self.with_retries(|| self.provider.token_probs(probe))?;
        for (t, p) in &raw {
            if !(0.0..=1.0).contains(p) {
                return Err(GatewayError::InvalidResponse(format!("probability {p} for `{t}` outside [0, 1]")));
            }
        }
        if let Some(cache) = &self.cache {
            cache.put(&key, &raw)?;
        }
        let meta = TransportMeta { latency_ms: start.elapsed().as_millis() as u64, retries, cache_hit: false };
        Ok(ProbeResult::new(probe, self.model_id(), raw, meta))
    }

    /// Evaluates every probe on up to `max_parallel` workers. Results come back
    /// in input order; the first failure (by input position) is returned.
    pub fn run(&self, probes: &[ProbeInstance]) -> Result<Vec<ProbeResult>> {
        let mut tokens: Vec<String> = probes.iter().flat_map(|p| p.options.iter().map(|o| o.token.clone())).collect();
        tokens.sort();
        tokens.dedup();
        validate_answer_tokens(self.provider.as_ref(), &tokens)?;

        let slots: Vec<OnceLock<Result<ProbeResult>>> = probes.iter().map(|_| OnceLock::new()).collect();
        let next = AtomicUsize::new(0);
        let failed = AtomicBool::new(false);
        let workers = self.max_parallel.min(probes.len()).max(1);
        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    if failed.load(Ordering::Relaxed) {
                        break;
                    }
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= probes.len() {
                        break;
                    }
                    let r = self.get_token_probs(&probes[i]);
                    if r.is_err() {
                        failed.store(true, Ordering::Relaxed);
                    }
                    let _ = slots[i].set(r);
                });
            }
        });
        let mut out = Vec::with_capacity(probes.len());
        for (i, slot) in slots.into_iter().enumerate() {
            match slot.into_inner() {
                Some(r) => out.push(r?),
                None => {
                    return Err(GatewayError::Config(format!("probe {i} was not evaluated after an earlier failure")))
                }
            }
        }
        Ok(out)
    }

    /// Greedy short generation, retried but never cached.
    pub fn generate_short(&self, probe: &ProbeInstance, max_tokens: usize) -> Result<String> {
        Ok(self.with_retries(|| self.provider.generate(probe, max_tokens))?.0)
    }
}
