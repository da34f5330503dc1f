//! Aligned prompt pairs for repetition-invariance fine-tuning.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};
use srcpref_core::conflict::{build_conflict_pairs, ConflictPair};
use srcpref_core::entity::Entity;
use srcpref_core::mitigation::{
    build_test_pairs, build_training_pairs, variant_pairs, verify_split, write_export, AlignedPromptPair,
    ExportManifest, ExportRecord, PairBuildConfig, Split, TrainingConfig, DEFAULT_TRAINING_INPUTS,
    EXPORT_SCHEMA_VERSION, KL_FLOOR,
};
use srcpref_core::perturb::Alternatives;
use srcpref_core::rng::{digest_hex, substream};
use srcpref_core::sources::ReservedVocab;
use srcpref_gateway::Gateway;

use crate::data::Inputs;
use crate::error::{Result, RunnerError};

pub const DEFAULT_TRAINING_ENTITIES: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExportOptions {
    pub seed: u64,
    /// Seed entities (smallest ids first) whose conflicts feed training.
    pub training_entities: usize,
    /// Training plus validation inputs.
    pub target: usize,
}

impl ExportOptions {
    pub fn new(seed: u64) -> Self {
        Self { seed, training_entities: DEFAULT_TRAINING_ENTITIES, target: DEFAULT_TRAINING_INPUTS }
    }
}

#[derive(Debug, Clone)]
pub struct ExportSet {
    pub reserved: ReservedVocab,
    pub train: Vec<AlignedPromptPair>,
    pub validation: Vec<AlignedPromptPair>,
    pub test: Vec<AlignedPromptPair>,
}

/// Conflict counts on the training entities (base vs variant, then with
/// variant-vs-variant conflicts added) and on the held-out entities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictCounts {
    pub training_base: usize,
    pub training_total: usize,
    pub test: usize,
}

fn partition<'a>(entities: &'a [Entity], n: usize) -> (Vec<Entity>, Vec<Entity>) {
    let mut sorted: Vec<&'a Entity> = entities.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let n = n.min(sorted.len());
    (sorted[..n].iter().map(|e| (*e).clone()).collect(), sorted[n..].iter().map(|e| (*e).clone()).collect())
}

fn alternatives_of(entities: &[Entity], alternatives: &[Alternatives]) -> Vec<Alternatives> {
    let ids: BTreeSet<&str> = entities.iter().map(|e| e.id.as_str()).collect();
    alternatives.iter().filter(|a| ids.contains(a.entity_id.as_str())).cloned().collect()
}

fn held_out_conflicts(rest: &[Entity], alternatives: &[Alternatives]) -> Result<Vec<ConflictPair>> {
    Ok(build_conflict_pairs(rest, &alternatives_of(rest, alternatives))?)
}

pub fn conflict_counts(entities: &[Entity], alternatives: &[Alternatives], training_entities: usize) -> Result<ConflictCounts> {
    let (train, rest) = partition(entities, training_entities);
    let alts = alternatives_of(&train, alternatives);
    let training_base = build_conflict_pairs(&train, &alts)?.len();
    let training_total = training_base + variant_pairs(&train, &alts)?.len();
    Ok(ConflictCounts { training_base, training_total, test: held_out_conflicts(&rest, alternatives)?.len() })
}

/// Builds every split and verifies vocabulary separation.
pub fn build_export_set(inputs: &Inputs, opts: &ExportOptions) -> Result<ExportSet> {
    if opts.training_entities >= inputs.entities.len() {
        return Err(RunnerError::Config(format!(
            "{} training entities leave none of {} for testing",
            opts.training_entities,
            inputs.entities.len()
        )));
    }
    let reserved = ReservedVocab::split(&inputs.lexicon, &mut substream(opts.seed, "mitigation/reserved"));
    let (train_entities, rest) = partition(&inputs.entities, opts.training_entities);
    let cfg = PairBuildConfig::new(opts.seed);
    let (train, validation) =
        build_training_pairs(&train_entities, &inputs.alternatives, &inputs.lexicon, &reserved, opts.target, &cfg)?;
    let conflicts = held_out_conflicts(&rest, &inputs.alternatives)?;
    let test = build_test_pairs(&conflicts, &inputs.lexicon, &reserved, &cfg)?;
    let all_train: Vec<AlignedPromptPair> = train.iter().chain(&validation).cloned().collect();
    verify_split(&reserved, &all_train, &test).map_err(|e| RunnerError::SplitViolation(e.to_string()))?;
    Ok(ExportSet { reserved, train, validation, test })
}

/// Teacher distributions on the unrepeated prompts of the training side.
/// Degenerate responses leave the teacher unset.
pub fn teacher_probs(gateway: &Gateway, pairs: &[AlignedPromptPair]) -> Result<Vec<Option<[f64; 2]>>> {
    let probes: Vec<_> = pairs.iter().map(|p| p.unrepeated.clone()).collect();
    let results = gateway.run(&probes)?;
    Ok(results
        .into_iter()
        .map(|r| r.normalized.filter(|n| n.len() == 2).map(|n| [n[0], n[1]]))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportSummary {
    pub manifest: ExportManifest,
    pub without_teacher: usize,
}

/// Writes `aligned_pairs.jsonl`, `export_manifest.json`,
/// `training_config.toml` and `reserved_vocab.tsv` under `dir`.
pub fn write_export_dir(
    dir: &Path,
    set: &ExportSet,
    teacher: Option<&Gateway>,
    opts: &ExportOptions,
) -> Result<ExportSummary> {
    fs::create_dir_all(dir)?;
    let training: Vec<AlignedPromptPair> = set.train.iter().chain(&set.validation).cloned().collect();
    let teachers = match teacher {
        Some(g) => teacher_probs(g, &training)?,
        None => vec![None; training.len()],
    };
    let mut records = Vec::with_capacity(training.len() + set.test.len());
    for (p, t) in training.iter().zip(&teachers) {
        records.push(ExportRecord::new(p, *t)?);
    }
    for p in &set.test {
        records.push(ExportRecord::new(p, None)?);
    }
    write_export(&records, BufWriter::new(File::create(dir.join("aligned_pairs.jsonl"))?))?;

    let tsv = set.reserved.to_tsv();
    fs::write(dir.join("reserved_vocab.tsv"), &tsv)?;
    let mut counts = BTreeMap::new();
    counts.insert(Split::Train, set.train.len());
    counts.insert(Split::Validation, set.validation.len());
    counts.insert(Split::Test, set.test.len());
    let manifest = ExportManifest {
        schema_version: EXPORT_SCHEMA_VERSION,
        seed: opts.seed,
        counts,
        split_check: "passed".into(),
        reserved_vocab_digest: digest_hex(tsv.as_bytes()),
        kl_floor: format!("{KL_FLOOR:e}"),
    };
    fs::write(dir.join("export_manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    let training_config =
        toml::to_string_pretty(&TrainingConfig::default()).map_err(|e| RunnerError::Config(e.to_string()))?;
    fs::write(dir.join("training_config.toml"), training_config)?;
    let without_teacher = teacher.map_or(0, |_| teachers.iter().filter(|t| t.is_none()).count());
    Ok(ExportSummary { manifest, without_teacher })
}
