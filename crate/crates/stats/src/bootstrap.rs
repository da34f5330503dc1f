use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Result, StatsError};

pub const DEFAULT_RESAMPLES: usize = 10_000;
/// Below this many resamples the test is flagged as underpowered.
pub const MIN_RECOMMENDED_RESAMPLES: usize = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub seed: u64,
    /// Two-sided coverage of the reported percentile interval.
    pub confidence: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            resamples: DEFAULT_RESAMPLES,
            seed: 0,
            confidence: 0.95,
        }
    }
}

/// Outcome of one hypothesis test. `rejected` is filled in after multiple
/// comparison correction; a fresh result always carries `false`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n_resamples: usize,
    pub ci_low: f64,
    pub ci_high: f64,
    pub rejected: bool,
    pub warnings: Vec<String>,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Nonparametric bootstrap test of H0: mean = 0.
///
/// Observations are resampled with replacement; the bootstrap distribution of
/// the mean is shifted to be centred on zero and the two-sided p-value is the
/// share of shifted replicates at least as extreme as the observed mean, with
/// the usual +1 correction. The input is sorted before resampling so the
/// result does not depend on the order in which observations were collected.
pub fn bootstrap_test(values: &[f64], config: &BootstrapConfig) -> Result<TestResult> {
    if values.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::DegenerateInput("non-finite observation".into()));
    }
    let mut warnings = Vec::new();
    if config.resamples < MIN_RECOMMENDED_RESAMPLES {
        warnings.push(format!(
            "underpowered: {} resamples (< {MIN_RECOMMENDED_RESAMPLES})",
            config.resamples
        ));
    }
    let resamples = config.resamples.max(1);

    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let observed = mean(&sorted);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut scratch = vec![0.0; n];
    let mut replicates = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        for slot in scratch.iter_mut() {
            *slot = sorted[rng.random_range(0..n)];
        }
        replicates.push(mean(&scratch));
    }

    let extreme = replicates
        .iter()
        .filter(|m| (*m - observed).abs() >= observed.abs())
        .count();
    let p_value = (extreme + 1) as f64 / (resamples + 1) as f64;

    replicates.sort_by(f64::total_cmp);
    let tail = (1.0 - config.confidence) / 2.0;
    let ci_low = percentile(&replicates, tail);
    let ci_high = percentile(&replicates, 1.0 - tail);

    Ok(TestResult {
        statistic: observed,
        p_value: p_value.min(1.0),
        n_resamples: resamples,
        ci_low,
        ci_high,
        rejected: false,
        warnings,
    })
}

// Nearest-rank percentile on sorted data.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(seed: u64) -> BootstrapConfig {
        BootstrapConfig { seed, ..Default::default() }
    }

    #[test]
    fn constant_nonzero_is_highly_significant() {
        let r = bootstrap_test(&vec![0.3; 200], &cfg(1)).unwrap();
        assert!(r.p_value < 0.001, "{}", r.p_value);
        assert_eq!(r.ci_low, r.ci_high);
    }

    #[test]
    fn all_zero_is_p_one() {
        let r = bootstrap_test(&vec![0.0; 50], &cfg(1)).unwrap();
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn empty_is_rejected() {
        assert_eq!(bootstrap_test(&[], &cfg(1)), Err(StatsError::EmptyInput));
    }

    #[test]
    fn few_resamples_warns() {
        let c = BootstrapConfig { resamples: 200, seed: 3, confidence: 0.95 };
        let r = bootstrap_test(&[0.1, -0.2, 0.4], &c).unwrap();
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn permutation_and_seed_determinism() {
        let v = vec![0.2, -0.1, 0.05, 0.3, -0.4, 0.12, 0.0, 0.33];
        let mut w = v.clone();
        w.reverse();
        let a = bootstrap_test(&v, &cfg(9)).unwrap();
        let b = bootstrap_test(&w, &cfg(9)).unwrap();
        assert_eq!(a, b);
    }
}
