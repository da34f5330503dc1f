//! Deterministic in-process models. They read the probe's structure (option
//! sides, slot sources, table counts), never its rendered text.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use srcpref_core::prompt::{AnswerOption, ProbeInstance};

use crate::error::{GatewayError, Result};
use crate::provider::ProbabilityProvider;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MockKind {
    Uniform,
    /// `P(second option) = 0.5 + β/2` on every two-option probe.
    PositionBiased { beta: f64 },
    /// `+strength` toward the option whose tables cite a source whose label
    /// contains `keyword` (or, without context, whose text contains it).
    SourceAffinity { keyword: String, strength: f64 },
    /// `+gamma` toward the option whose value appears in more tables.
    TableMajority { gamma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockModel {
    pub id: String,
    #[serde(flatten)]
    pub kind: MockKind,
    /// Fixed reply for short generations; the most probable token otherwise.
    #[serde(default)]
    pub reply: Option<String>,
}

impl MockModel {
    pub fn new(id: impl Into<String>, kind: MockKind) -> Result<Self> {
        let param = match &kind {
            MockKind::Uniform => 0.0,
            MockKind::PositionBiased { beta } => *beta,
            MockKind::SourceAffinity { strength, .. } => *strength,
            MockKind::TableMajority { gamma } => *gamma,
        };
        if !(0.0..=1.0).contains(&param) {
            return Err(GatewayError::Config(format!("mock parameter {param} outside [0, 1]")));
        }
        Ok(Self { id: id.into(), kind, reply: None })
    }

    pub fn uniform() -> Self {
        Self { id: "mock-uniform".into(), kind: MockKind::Uniform, reply: None }
    }

    pub fn position_biased(beta: f64) -> Result<Self> {
        Self::new(format!("mock-position-{beta}"), MockKind::PositionBiased { beta })
    }

    pub fn source_affinity(keyword: &str, strength: f64) -> Result<Self> {
        Self::new(
            format!("mock-affinity-{strength}"),
            MockKind::SourceAffinity { keyword: keyword.to_string(), strength },
        )
    }

    pub fn table_majority(gamma: f64) -> Result<Self> {
        Self::new(format!("mock-majority-{gamma}"), MockKind::TableMajority { gamma })
    }

    pub fn with_reply(mut self, reply: impl Into<String>) -> Self {
        self.reply = Some(reply.into());
        self
    }

    fn affinity(&self, probe: &ProbeInstance, option: &AnswerOption, keyword: &str) -> bool {
        match (&probe.context, option.side) {
            (Some(ctx), Some(side)) => ctx.sources_on(side).any(|s| s.label().contains(keyword)),
            _ => option.text.contains(keyword),
        }
    }

    fn table_count(probe: &ProbeInstance, option: &AnswerOption) -> usize {
        match (&probe.context, option.side) {
            (Some(ctx), Some(side)) => ctx.tables_on(side),
            _ => 0,
        }
    }

    /// Probabilities in option order.
    pub fn probabilities(&self, probe: &ProbeInstance) -> Vec<f64> {
        let n = probe.options.len();
        let mut p = vec![1.0 / n as f64; n];
        let favored: Option<(usize, f64)> = match &self.kind {
            MockKind::Uniform => None,
            MockKind::PositionBiased { beta } => (n == 2).then_some((1, beta / 2.0)),
            MockKind::SourceAffinity { keyword, strength } => {
                let hits: Vec<usize> =
                    (0..n).filter(|&i| self.affinity(probe, &probe.options[i], keyword)).collect();
                (hits.len() == 1).then(|| (hits[0], *strength))
            }
            MockKind::TableMajority { gamma } => {
                let counts: Vec<usize> = probe.options.iter().map(|o| Self::table_count(probe, o)).collect();
                let max = counts.iter().copied().max().unwrap_or(0);
                let leaders: Vec<usize> = (0..n).filter(|&i| counts[i] == max).collect();
                (leaders.len() == 1 && max > 0).then(|| (leaders[0], *gamma))
            }
        };
        if let Some((i, shift)) = favored {
            for (j, pj) in p.iter_mut().enumerate() {
                if j == i {
                    *pj += shift;
                } else {
                    *pj -= shift / (n - 1) as f64;
                }
                *pj = pj.clamp(0.0, 1.0);
            }
        }
        p
    }
}

impl ProbabilityProvider for MockModel {
    fn model_id(&self) -> &str {
        &self.id
    }

    fn token_probs(&self, probe: &ProbeInstance) -> Result<BTreeMap<String, f64>> {
        Ok(probe.options.iter().map(|o| o.token.clone()).zip(self.probabilities(probe)).collect())
    }

    fn generate(&self, probe: &ProbeInstance, _max_tokens: usize) -> Result<String> {
        if let Some(r) = &self.reply {
            return Ok(r.clone());
        }
        let p = self.probabilities(probe);
        let best = (0..p.len()).fold(0, |b, i| if p[i] > p[b] { i } else { b });
        Ok(probe.options[best].token.clone())
    }

    fn token_pieces(&self, _token: &str) -> Result<Option<usize>> {
        Ok(Some(1))
    }
}
