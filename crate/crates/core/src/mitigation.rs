//! Repetition-invariance distillation: aligned prompt pairs, the dual-KL
//! objective, a toy gradient check and the trainer hand-off file.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chat::ChatMessage;
use crate::conflict::{build_conflict_pairs, ConflictPair};
use crate::entity::Entity;
use crate::error::{MitigationError, PromptError};
use crate::lexicon::Lexicon;
use crate::perturb::Alternatives;
use crate::prompt::{
    build_conflict_probe, AnswerTokens, ContextSpec, InstructionVariant, ProbeInstance, ProbeOrder, Side,
};
use crate::rng::{substream, StreamRng};
use crate::sources::{check_split, ReservedVocab, SourceSampler, SourceSpec, SourceType, VocabSide};

type Result<T> = std::result::Result<T, MitigationError>;

pub const DEFAULT_LAMBDA: f64 = 0.75;
pub const KL_FLOOR: f64 = 1e-12;
pub const DEFAULT_TRAINING_INPUTS: usize = 1500;
pub const DEFAULT_VALIDATION_INPUTS: usize = 40;
const DISTRIBUTION_TOLERANCE: f64 = 1e-9;

pub type Dist2 = [f64; 2];

fn check_dist(d: &Dist2, what: &str) -> Result<()> {
    if d.iter().any(|p| !p.is_finite() || *p < 0.0) || ((d[0] + d[1]) - 1.0).abs() > DISTRIBUTION_TOLERANCE {
        return Err(MitigationError::DistributionError(format!("{what} {d:?} is not a distribution")));
    }
    Ok(())
}

/// `Σ p ln(p / q)` with both arguments floored at [`KL_FLOOR`]; zero-mass
/// teacher outcomes contribute nothing.
pub fn kl(p: &Dist2, q: &Dist2) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi.max(KL_FLOOR) / qi.max(KL_FLOOR)).ln())
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillationBatch {
    pub teacher_u: Vec<Dist2>,
    pub student_u: Vec<Dist2>,
    pub student_r: Vec<Dist2>,
    pub lambda: f64,
}

/// `λ·KL(t_U ‖ s_U) + (1 − λ)·KL(t_U ‖ s_R)`, averaged over the batch.
pub fn dual_kl_loss(batch: &DistillationBatch) -> Result<f64> {
    let n = batch.teacher_u.len();
    if n == 0 || batch.student_u.len() != n || batch.student_r.len() != n {
        return Err(MitigationError::DistributionError(format!(
            "batch lists must be non-empty and equal length ({}, {}, {})",
            n,
            batch.student_u.len(),
            batch.student_r.len()
        )));
    }
    if !(0.0..=1.0).contains(&batch.lambda) {
        return Err(MitigationError::DistributionError(format!("lambda {} outside [0, 1]", batch.lambda)));
    }
    let mut total = 0.0;
    for i in 0..n {
        check_dist(&batch.teacher_u[i], "teacher")?;
        check_dist(&batch.student_u[i], "student (unrepeated)")?;
        check_dist(&batch.student_r[i], "student (repeated)")?;
        let t = &batch.teacher_u[i];
        total += batch.lambda * kl(t, &batch.student_u[i]) + (1.0 - batch.lambda) * kl(t, &batch.student_r[i]);
    }
    Ok(total / n as f64)
}

/// A linear two-logit scorer: `z_k = w_k · φ`, with `w` stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    pub weights: Vec<f64>,
    pub dim: usize,
}

/// Teacher distribution plus the feature encodings of both prompts.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyExample {
    pub teacher: Dist2,
    pub phi_u: Vec<f64>,
    pub phi_r: Vec<f64>,
}

fn softmax2(z: [f64; 2]) -> Dist2 {
    let m = z[0].max(z[1]);
    let e = [(z[0] - m).exp(), (z[1] - m).exp()];
    let s = e[0] + e[1];
    [e[0] / s, e[1] / s]
}

impl ToyModel {
    pub fn zeros(dim: usize) -> Self {
        Self { weights: vec![0.0; 2 * dim], dim }
    }

    pub fn predict(&self, phi: &[f64]) -> Dist2 {
        let dot = |k: usize| self.weights[k * self.dim..(k + 1) * self.dim].iter().zip(phi).map(|(w, x)| w * x).sum();
        softmax2([dot(0), dot(1)])
    }

    fn batch(&self, examples: &[ToyExample], lambda: f64) -> DistillationBatch {
        DistillationBatch {
            teacher_u: examples.iter().map(|e| e.teacher).collect(),
            student_u: examples.iter().map(|e| self.predict(&e.phi_u)).collect(),
            student_r: examples.iter().map(|e| self.predict(&e.phi_r)).collect(),
            lambda,
        }
    }

    pub fn loss(&self, examples: &[ToyExample], lambda: f64) -> Result<f64> {
        dual_kl_loss(&self.batch(examples, lambda))
    }

    /// Analytic gradient: `∂KL(t ‖ softmax(z))/∂z = softmax(z) − t`, chained
    /// through the linear map. Exact while no student probability falls below
    /// the KL floor.
    pub fn gradient(&self, examples: &[ToyExample], lambda: f64) -> Vec<f64> {
        let mut g = vec![0.0; self.weights.len()];
        let n = examples.len() as f64;
        for e in examples {
            for (phi, weight) in [(&e.phi_u, lambda), (&e.phi_r, 1.0 - lambda)] {
                let q = self.predict(phi);
                for k in 0..2 {
                    let coef = weight * (q[k] - e.teacher[k]) / n;
                    for (j, x) in phi.iter().enumerate() {
                        g[k * self.dim + j] += coef * x;
                    }
                }
            }
        }
        g
    }

    pub fn numeric_gradient(&self, examples: &[ToyExample], lambda: f64, h: f64) -> Result<Vec<f64>> {
        let mut g = Vec::with_capacity(self.weights.len());
        for i in 0..self.weights.len() {
            let mut plus = self.clone();
            plus.weights[i] += h;
            let mut minus = self.clone();
            minus.weights[i] -= h;
            g.push((plus.loss(examples, lambda)? - minus.loss(examples, lambda)?) / (2.0 * h));
        }
        Ok(g)
    }
}

/// Largest `|a − n| / max(|a| + |n|, 1e-8)` between analytic and central
/// finite-difference gradients.
pub fn toy_gradient_check(model: &ToyModel, examples: &[ToyExample], lambda: f64, h: f64) -> Result<f64> {
    let a = model.gradient(examples, lambda);
    let n = model.numeric_gradient(examples, lambda, h)?;
    Ok(a.iter().zip(&n).map(|(a, n)| (a - n).abs() / (a.abs() + n.abs()).max(1e-8)).fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// One conflict rendered without (`C'_U`) and with (`C'_R`) a duplicated
/// table. Both prompts bind the same values to the same option tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedPromptPair {
    pub pair_id: String,
    pub conflict_id: String,
    pub split: Split,
    pub x: SourceSpec,
    pub y: SourceSpec,
    /// Which side of `unrepeated` is shown twice in `repeated`.
    pub duplicated_side: Side,
    pub unrepeated: ProbeInstance,
    pub repeated: ProbeInstance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairBuildConfig {
    pub seed: u64,
    pub instruction_variant: InstructionVariant,
    pub answer_tokens: AnswerTokens,
}

impl PairBuildConfig {
    pub fn new(seed: u64) -> Self {
        Self { seed, instruction_variant: InstructionVariant::Default, answer_tokens: AnswerTokens::AB }
    }
}

/// Renders the aligned prompts for one conflict with `x` on the base view.
/// The duplicate of the chosen side is appended as the third table.
pub fn align(
    conflict: &ConflictPair,
    x: &SourceSpec,
    y: &SourceSpec,
    duplicated: Side,
    reversed: bool,
    lexicon: &Lexicon,
    config: &PairBuildConfig,
) -> std::result::Result<(ProbeInstance, ProbeInstance), PromptError> {
    let order = if reversed { ProbeOrder::REVERSED } else { ProbeOrder::ORIGINAL };
    let ctx = ContextSpec::pair(conflict, Some(x), Some(y));
    let unrepeated =
        build_conflict_probe(conflict, &ctx, &lexicon.questions, config.instruction_variant, order, config.answer_tokens)?;
    let first = if reversed { Side::B } else { Side::A };
    let rep_ctx = match duplicated {
        Side::A => ContextSpec::repetition(conflict, Some(x), Some(y))?,
        Side::B => ContextSpec::repetition(&conflict.swapped(), Some(y), Some(x))?,
    };
    // Arrangement 1 is ABA, 2 is BAA; either keeps the first two tables of C'_U.
    let arrangement = if duplicated == first { 1 } else { 2 };
    let rep_pair = if duplicated == Side::A { conflict.clone() } else { conflict.swapped() };
    let repeated = build_conflict_probe(
        &rep_pair,
        &rep_ctx,
        &lexicon.questions,
        config.instruction_variant,
        ProbeOrder { arrangement, options_flipped: false },
        config.answer_tokens,
    )?;
    let texts = |p: &ProbeInstance| p.options.iter().map(|o| (o.token.clone(), o.text.clone())).collect::<Vec<_>>();
    if texts(&unrepeated) != texts(&repeated) {
        return Err(PromptError::Layout("aligned prompts bind options differently".into()));
    }
    Ok((unrepeated, repeated))
}

/// Conflicts between two perturbed views of the same attribute.
pub fn variant_pairs(entities: &[Entity], alternatives: &[Alternatives]) -> std::result::Result<Vec<ConflictPair>, crate::error::DataError> {
    let by_id: BTreeMap<&str, &Entity> = entities.iter().map(|e| (e.id.as_str(), e)).collect();
    let mut out = Vec::new();
    for alt in alternatives {
        let Some(base) = by_id.get(alt.entity_id.as_str()) else { continue };
        for i in 0..alt.values.len() {
            for j in i + 1..alt.values.len() {
                let a = base.with_value(&alt.attribute, alt.values[i].clone())?;
                let b = base.with_value(&alt.attribute, alt.values[j].clone())?;
                let id = format!("{}/{}/{i}~{j}", alt.entity_id, alt.attribute);
                out.push(ConflictPair::new(id, a, b, &alt.attribute)?);
            }
        }
    }
    Ok(out)
}

/// Number of validation inputs, scaled from the 40-of-1500 reference split.
pub fn validation_count(total: usize) -> usize {
    if total < 2 {
        return 0;
    }
    ((total * DEFAULT_VALIDATION_INPUTS + DEFAULT_TRAINING_INPUTS / 2) / DEFAULT_TRAINING_INPUTS).clamp(1, total - 1)
}

fn unordered_matchups() -> Vec<(SourceType, SourceType)> {
    let t = SourceType::INTER;
    let mut out = Vec::new();
    for i in 0..t.len() {
        for j in i + 1..t.len() {
            out.push((t[i], t[j]));
        }
    }
    out
}

fn aligned(
    conflict: &ConflictPair,
    pair_id: String,
    split: Split,
    (xt, yt): (SourceType, SourceType),
    sampler: &SourceSampler<'_>,
    lexicon: &Lexicon,
    config: &PairBuildConfig,
) -> Result<AlignedPromptPair> {
    let mut rng: StreamRng = substream(config.seed, &format!("align/{pair_id}"));
    let conflict = if rng.random_bool(0.5) { conflict.swapped() } else { conflict.clone() };
    let (x, y) = sampler.sample_distinct(xt, yt, conflict.entity().entity_type, &mut rng)?;
    let duplicated = if rng.random_bool(0.5) { Side::A } else { Side::B };
    let reversed = rng.random_bool(0.5);
    let (unrepeated, repeated) = align(&conflict, &x, &y, duplicated, reversed, lexicon, config)?;
    Ok(AlignedPromptPair {
        pair_id,
        conflict_id: conflict.id.clone(),
        split,
        x,
        y,
        duplicated_side: duplicated,
        unrepeated,
        repeated,
    })
}

/// Training and validation pairs from the seed entities' base-vs-variant and
/// variant-vs-variant conflicts, crossed with every unordered pair of source
/// types and subsampled to `target` inputs.
pub fn build_training_pairs(
    entities: &[Entity],
    alternatives: &[Alternatives],
    lexicon: &Lexicon,
    reserved: &ReservedVocab,
    target: usize,
    config: &PairBuildConfig,
) -> Result<(Vec<AlignedPromptPair>, Vec<AlignedPromptPair>)> {
    let ids: BTreeSet<&str> = entities.iter().map(|e| e.id.as_str()).collect();
    let alts: Vec<Alternatives> = alternatives.iter().filter(|a| ids.contains(a.entity_id.as_str())).cloned().collect();
    let mut conflicts = build_conflict_pairs(entities, &alts).map_err(|e| MitigationError::Schema(e.to_string()))?;
    conflicts.extend(variant_pairs(entities, &alts).map_err(|e| MitigationError::Schema(e.to_string()))?);
    let mut candidates: Vec<(usize, (SourceType, SourceType))> =
        (0..conflicts.len()).flat_map(|i| unordered_matchups().into_iter().map(move |m| (i, m))).collect();
    let mut rng: StreamRng = substream(config.seed, "training/select");
    candidates.shuffle(&mut rng);
    candidates.truncate(target);
    let n_val = validation_count(candidates.len());
    let sampler = SourceSampler::with_side(lexicon, VocabSide::Train(reserved));
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (k, (i, m)) in candidates.into_iter().enumerate() {
        let c = &conflicts[i];
        let split = if k < n_val { Split::Validation } else { Split::Train };
        let id = format!("{}#{}-{}", c.id, m.0, m.1);
        let p = aligned(c, id, split, m, &sampler, lexicon, config)?;
        if split == Split::Validation {
            val.push(p);
        } else {
            train.push(p);
        }
    }
    Ok((train, val))
}

/// Government-vs-social-media test pairs on the test side of the vocabulary.
pub fn build_test_pairs(
    conflicts: &[ConflictPair],
    lexicon: &Lexicon,
    reserved: &ReservedVocab,
    config: &PairBuildConfig,
) -> Result<Vec<AlignedPromptPair>> {
    let sampler = SourceSampler::with_side(lexicon, VocabSide::Test(reserved));
    let m = (SourceType::Government, SourceType::SocialMedia);
    conflicts
        .iter()
        .map(|c| aligned(c, format!("{}#{}-{}", c.id, m.0, m.1), Split::Test, m, &sampler, lexicon, config))
        .collect()
}

/// Exhaustive split check over every source in both sets.
pub fn verify_split(reserved: &ReservedVocab, train: &[AlignedPromptPair], test: &[AlignedPromptPair]) -> Result<()> {
    let sources = |ps: &[AlignedPromptPair]| -> Vec<SourceSpec> {
        ps.iter().flat_map(|p| [p.x.clone(), p.y.clone()]).collect()
    };
    let tr = sources(train);
    let te = sources(test);
    let tr: Vec<&SourceSpec> = tr.iter().collect();
    let te: Vec<&SourceSpec> = te.iter().collect();
    check_split(reserved, &tr, &te)?;
    Ok(())
}

pub const EXPORT_SCHEMA: &str = "srcpref.aligned_pairs";
pub const EXPORT_SCHEMA_VERSION: u32 = 1;
/// JSON Schema for every line of the export file.
pub const EXPORT_JSON_SCHEMA: &str = include_str!("../schemas/aligned_pairs.schema.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportHeader {
    pub schema: String,
    pub schema_version: u32,
    pub records: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportOption {
    pub token: String,
    pub text: String,
}

/// One trainer-facing record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportRecord {
    pub pair_id: String,
    pub split: Split,
    pub x: String,
    pub y: String,
    pub duplicated_side: Side,
    pub options: Vec<ExportOption>,
    pub unrepeated: Vec<ChatMessage>,
    pub repeated: Vec<ChatMessage>,
    /// Frozen teacher distribution on the unrepeated prompt, in option order.
    pub teacher: Option<Dist2>,
}

impl ExportRecord {
    pub fn new(pair: &AlignedPromptPair, teacher: Option<Dist2>) -> Result<Self> {
        if let Some(t) = &teacher {
            check_dist(t, "teacher")?;
        }
        Ok(Self {
            pair_id: pair.pair_id.clone(),
            split: pair.split,
            x: pair.x.label(),
            y: pair.y.label(),
            duplicated_side: pair.duplicated_side,
            options: pair
                .unrepeated
                .options
                .iter()
                .map(|o| ExportOption { token: o.token.clone(), text: o.text.clone() })
                .collect(),
            unrepeated: pair.unrepeated.messages.clone(),
            repeated: pair.repeated.messages.clone(),
            teacher,
        })
    }
}

pub fn write_export<W: Write>(records: &[ExportRecord], mut w: W) -> Result<()> {
    let header = ExportHeader {
        schema: EXPORT_SCHEMA.to_string(),
        schema_version: EXPORT_SCHEMA_VERSION,
        records: records.len(),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_export<R: BufRead>(reader: R) -> Result<(ExportHeader, Vec<ExportRecord>)> {
    let mut lines = reader.lines();
    let first = lines.next().ok_or_else(|| MitigationError::Schema("empty export".into()))??;
    let header: ExportHeader = serde_json::from_str(&first)?;
    if header.schema != EXPORT_SCHEMA || header.schema_version != EXPORT_SCHEMA_VERSION {
        return Err(MitigationError::Schema(format!("unsupported header {header:?}")));
    }
    let mut records = Vec::new();
    for line in lines {
        let line = line?;
        if !line.trim().is_empty() {
            records.push(serde_json::from_str(&line)?);
        }
    }
    if records.len() != header.records {
        return Err(MitigationError::Schema(format!("header declares {} records, found {}", header.records, records.len())));
    }
    Ok((header, records))
}

/// Written next to the export; the trainer refuses files without a passed
/// split check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportManifest {
    pub schema_version: u32,
    pub seed: u64,
    pub counts: BTreeMap<Split, usize>,
    pub split_check: String,
    pub reserved_vocab_digest: String,
    pub kl_floor: String,
}

/// Fine-tuning hyperparameters handed to the trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub base_model: String,
    pub lora_rank: u32,
    pub lora_alpha: u32,
    pub lora_dropout: f64,
    pub learning_rate: f64,
    pub warmup_fraction: f64,
    pub batch_size: u32,
    pub eval_every_steps: u32,
    pub early_stopping_patience: u32,
    pub max_epochs: u32,
    pub consolidation_steps: u32,
    pub consolidation_lambda: f64,
    pub lambda: f64,
    pub lambda_grid: Vec<f64>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            base_model: "google/gemma-3-4b-it".into(),
            lora_rank: 16,
            lora_alpha: 16,
            lora_dropout: 0.05,
            learning_rate: 2e-4,
            warmup_fraction: 0.10,
            batch_size: 8,
            eval_every_steps: 32,
            early_stopping_patience: 2,
            max_epochs: 4,
            consolidation_steps: 300,
            consolidation_lambda: 1.0,
            lambda: DEFAULT_LAMBDA,
            lambda_grid: vec![0.5, 0.75, 0.9],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_zero_at_teacher() {
        let t = [0.7, 0.3];
        let b = DistillationBatch { teacher_u: vec![t], student_u: vec![t], student_r: vec![t], lambda: 0.75 };
        assert_eq!(dual_kl_loss(&b).unwrap(), 0.0);
    }

    #[test]
    fn invalid_batches_rejected() {
        let b = DistillationBatch { teacher_u: vec![[0.7, 0.4]], student_u: vec![[0.5; 2]], student_r: vec![[0.5; 2]], lambda: 0.5 };
        assert!(dual_kl_loss(&b).is_err());
        let b = DistillationBatch { teacher_u: vec![], student_u: vec![], student_r: vec![], lambda: 0.5 };
        assert!(dual_kl_loss(&b).is_err());
    }

    #[test]
    fn saturated_student_stays_finite() {
        let b = DistillationBatch { teacher_u: vec![[0.5; 2]], student_u: vec![[1.0, 0.0]], student_r: vec![[1.0, 0.0]], lambda: 0.75 };
        assert!(dual_kl_loss(&b).unwrap().is_finite());
    }

    #[test]
    fn validation_scaling() {
        assert_eq!(validation_count(1500), 40);
        assert_eq!(validation_count(478 * 6), 76);
        assert_eq!(validation_count(10), 1);
    }

    #[test]
    fn zero_model_on_uniform_teacher_has_zero_gradient() {
        let m = ToyModel::zeros(3);
        let ex = vec![ToyExample { teacher: [0.5, 0.5], phi_u: vec![1.0, 2.0, 3.0], phi_r: vec![-1.0, 0.5, 2.0] }];
        assert!(m.gradient(&ex, 0.75).iter().all(|g| *g == 0.0));
        assert!(m.numeric_gradient(&ex, 0.75, 1e-6).unwrap().iter().all(|g| g.abs() < 1e-9));
    }
}
