//! Run configuration, read from TOML. See `docs/config.md` for the schema.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use srcpref_core::prompt::{AnswerTokens, InstructionVariant};
use srcpref_gateway::{MockModel, ModelEndpoint};

use crate::error::{Result, RunnerError};

fn default_output() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// On-disk probability cache; runs resume from it.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    /// Archive raw HTTP exchanges under `<output>/archive/`.
    #[serde(default)]
    pub archive: bool,
    /// Deterministic subsample of conflict pairs.
    #[serde(default)]
    pub sample: Option<usize>,
    #[serde(default = "default_variant")]
    pub instruction_variant: InstructionVariant,
    #[serde(default = "default_tokens")]
    pub answer_tokens: AnswerTokens,
}

fn default_variant() -> InstructionVariant {
    InstructionVariant::Default
}

fn default_tokens() -> AnswerTokens {
    AnswerTokens::AB
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: default_output(),
            cache_dir: None,
            archive: false,
            sample: None,
            instruction_variant: default_variant(),
            answer_tokens: default_tokens(),
        }
    }
}

fn default_alternatives() -> usize {
    srcpref_core::perturb::DEFAULT_ALTERNATIVES
}

fn default_prompted_pairs() -> usize {
    1000
}

fn default_recognizability() -> usize {
    25
}

fn default_validation_probes() -> usize {
    100
}

fn default_location_match() -> f64 {
    srcpref_core::sources::DEFAULT_LOCATION_MATCH
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Seed entities (JSONL). The bundled sample is used when absent.
    #[serde(default)]
    pub entities: Option<PathBuf>,
    /// Pre-generated conflict pairs (JSONL from `generate-data`).
    #[serde(default)]
    pub pairs: Option<PathBuf>,
    /// Directory overriding the bundled lexicon files.
    #[serde(default)]
    pub lexicon_dir: Option<PathBuf>,
    /// Recorded generator replies for open categorical attributes (JSONL).
    #[serde(default)]
    pub generations: Option<PathBuf>,
    #[serde(default = "default_alternatives")]
    pub alternatives: usize,
    /// Source pairs per contrast in the prompted-preference experiment.
    #[serde(default = "default_prompted_pairs")]
    pub prompted_pairs: usize,
    /// Sources per type in the recognizability check.
    #[serde(default = "default_recognizability")]
    pub recognizability_per_type: usize,
    /// Probes in the table-format and instruction-following checks.
    #[serde(default = "default_validation_probes")]
    pub validation_probes: usize,
    /// Normalized edit distance below which an entity matches a location.
    #[serde(default = "default_location_match")]
    pub location_match: f64,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            entities: None,
            pairs: None,
            lexicon_dir: None,
            generations: None,
            alternatives: default_alternatives(),
            prompted_pairs: default_prompted_pairs(),
            recognizability_per_type: default_recognizability(),
            validation_probes: default_validation_probes(),
            location_match: default_location_match(),
        }
    }
}

fn default_resamples() -> usize {
    srcpref_stats::DEFAULT_RESAMPLES
}

fn default_alpha() -> f64 {
    0.05
}

fn default_confidence() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsSection {
    #[serde(default = "default_resamples")]
    pub resamples: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    /// Models that must be significant for a row to be reported. Defaults to
    /// ten thirteenths of the model count, rounded up.
    #[serde(default)]
    pub quorum: Option<usize>,
}

impl Default for StatsSection {
    fn default() -> Self {
        Self { resamples: default_resamples(), alpha: default_alpha(), confidence: default_confidence(), quorum: None }
    }
}

impl StatsSection {
    pub fn quorum_for(&self, models: usize) -> usize {
        self.quorum.unwrap_or_else(|| (10 * models).div_ceil(13)).min(models)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub stats: StatsSection,
    #[serde(default)]
    pub endpoints: Vec<ModelEndpoint>,
    #[serde(default)]
    pub mocks: Vec<MockModel>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        for e in &self.endpoints {
            e.validate()?;
            if !ids.insert(e.model_id.as_str()) {
                return Err(RunnerError::Config(format!("duplicate model id `{}`", e.model_id)));
            }
        }
        for m in &self.mocks {
            MockModel::new(m.id.clone(), m.kind.clone())?;
            if !ids.insert(m.id.as_str()) {
                return Err(RunnerError::Config(format!("duplicate model id `{}`", m.id)));
            }
        }
        if self.stats.resamples == 0 {
            return Err(RunnerError::Config("stats.resamples must be positive".into()));
        }
        if !(self.stats.alpha > 0.0 && self.stats.alpha < 1.0) {
            return Err(RunnerError::Config("stats.alpha must lie in (0, 1)".into()));
        }
        if !(self.stats.confidence > 0.0 && self.stats.confidence < 1.0) {
            return Err(RunnerError::Config("stats.confidence must lie in (0, 1)".into()));
        }
        if self.data.alternatives == 0 {
            return Err(RunnerError::Config("data.alternatives must be positive".into()));
        }
        if self.run.sample == Some(0) {
            return Err(RunnerError::Config("run.sample must be positive".into()));
        }
        Ok(())
    }

    pub fn model_ids(&self) -> Vec<String> {
        self.mocks.iter().map(|m| m.id.clone()).chain(self.endpoints.iter().map(|e| e.model_id.clone())).collect()
    }

    /// SHA-256 of the canonical TOML serialization.
    pub fn digest(&self) -> String {
        let text = toml::to_string(self).unwrap_or_default();
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}
