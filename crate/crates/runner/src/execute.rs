//! Probe execution, aggregation, testing and report writing.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use srcpref_core::error::MetricError;
use srcpref_core::metrics::{index_results, measure_pair, position_bias, side_probability, to_pp, ResultIndex};
use srcpref_core::prompt::{parse_short_answer, ProbeInstance, Side};
use srcpref_core::results::{ProbeResult, ResultRow, RESULT_COLUMNS};
use srcpref_core::rng::derive_seed;
use srcpref_core::sources::SourceType;
use srcpref_gateway::{Gateway, HttpProvider, ProbCache, ProbabilityProvider};
use srcpref_stats::{bootstrap_test, holm_bonferroni, BootstrapConfig};

use crate::catalog::{Builder, Experiment, ProbeSet, Setting, ValidationProbes};
use crate::config::{RunConfig, StatsSection};
use crate::data::Inputs;
use crate::error::{Result, RunnerError};
use crate::hierarchy::{induce_hierarchy, Hierarchy};

/// Tokens allowed in a short generation before it is parsed.
pub const SHORT_ANSWER_TOKENS: usize = 5;

/// Mocks first, then HTTP endpoints, all sharing one probability cache.
pub fn build_gateways(cfg: &RunConfig, archive: Option<&Path>) -> Result<Vec<Gateway>> {
    let cache = Arc::new(match &cfg.run.cache_dir {
        Some(dir) => ProbCache::on_disk(dir)?,
        None => ProbCache::in_memory(),
    });
    let mut out = Vec::new();
    for m in &cfg.mocks {
        let provider: Arc<dyn ProbabilityProvider> = Arc::new(m.clone());
        out.push(Gateway::new(provider).with_cache(cache.clone()));
    }
    for ep in &cfg.endpoints {
        let dir = archive.map(|a| a.join(&ep.model_id));
        let provider: Arc<dyn ProbabilityProvider> = Arc::new(HttpProvider::new(ep.clone(), dir)?);
        out.push(
            Gateway::new(provider)
                .with_cache(cache.clone())
                .with_parallelism(ep.max_parallel)
                .with_retry(ep.retry),
        );
    }
    Ok(out)
}

/// One model's responses to a probe set.
#[derive(Debug, Clone)]
pub struct ModelOutcome {
    pub model: String,
    pub results: Vec<ProbeResult>,
    /// Short generations for the instruction-following check, by probe id.
    pub replies: Vec<(String, String)>,
}

impl ModelOutcome {
    pub fn cache_hits(&self) -> usize {
        self.results.iter().filter(|r| r.transport.cache_hit).count()
    }

    pub fn degenerate(&self) -> usize {
        self.results.iter().filter(|r| r.is_degenerate()).count()
    }
}

pub fn evaluate(set: &ProbeSet, gateway: &Gateway) -> Result<ModelOutcome> {
    let probes = set.probes();
    log::info!("{}: {} probes for {}", gateway.model_id(), probes.len(), set.experiment);
    let results = gateway.run(&probes)?;
    let mut replies = Vec::new();
    if let Some(v) = &set.validation {
        for p in &v.instruction_following {
            replies.push((p.probe_id.clone(), gateway.generate_short(p, SHORT_ANSWER_TOKENS)?));
        }
    }
    Ok(ModelOutcome { model: gateway.model_id().to_string(), results, replies })
}

/// Per-pair SP in percentage points; `sp_pp` is empty for excluded pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerPairRow {
    pub model: String,
    pub panel: String,
    pub x: String,
    pub y: String,
    pub layout: String,
    pub instruction_variant: String,
    pub answer_tokens: String,
    pub pair_id: String,
    pub sp_pp: Option<f64>,
}

fn excluded_on_degenerate(v: std::result::Result<f64, MetricError>) -> Result<Option<f64>> {
    match v {
        Ok(v) => Ok(Some(v)),
        Err(MetricError::DegenerateProbs) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn side_a_mean(group: &[ProbeInstance], index: &ResultIndex<'_>) -> std::result::Result<f64, MetricError> {
    let mut sum = 0.0;
    for p in group {
        let r = index
            .get(p.probe_id.as_str())
            .ok_or_else(|| MetricError::IncompleteMeasurement(format!("no result for probe {}", p.probe_id)))?;
        sum += side_probability(p, r, Side::A)?;
    }
    Ok(sum / group.len() as f64)
}

pub fn per_pair_rows(set: &ProbeSet, outcome: &ModelOutcome) -> Result<Vec<PerPairRow>> {
    let index = index_results(&outcome.results);
    let row = |panel: &str, x: &str, y: &str, layout: &str, s: Setting, pair_id: &str, sp_pp| PerPairRow {
        model: outcome.model.clone(),
        panel: panel.to_string(),
        x: x.to_string(),
        y: y.to_string(),
        layout: layout.to_string(),
        instruction_variant: s.instruction_variant.to_string(),
        answer_tokens: s.answer_tokens.as_str().to_string(),
        pair_id: pair_id.to_string(),
        sp_pp,
    };
    let mut out = Vec::new();
    for m in &set.matchups {
        for p in &m.pairs {
            let sp = excluded_on_degenerate(measure_pair(p, &index).and_then(|mp| mp.sp()))?;
            out.push(row(&m.panel, &m.x, &m.y, m.layout.as_str(), m.setting, &p.pair_id, sp.map(to_pp)));
        }
    }
    for c in &set.prompted {
        for g in &c.groups {
            let sp = excluded_on_degenerate(side_a_mean(g, &index))?.map(|v| to_pp(v - 0.5));
            let id = g.first().map(|p| p.pair_id.as_str()).unwrap_or_default();
            out.push(row(&c.panel, &c.x, &c.y, "prompted", c.setting, id, sp));
        }
    }
    Ok(out)
}

/// A results row together with its correction family.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub panel: String,
    pub row: ResultRow,
}

type GroupKey = (String, String, String, String, String, String, String);

fn group_key(r: &PerPairRow) -> GroupKey {
    (
        r.model.clone(),
        r.panel.clone(),
        r.x.clone(),
        r.y.clone(),
        r.layout.clone(),
        r.instruction_variant.clone(),
        r.answer_tokens.clone(),
    )
}

pub fn bootstrap_seed(seed: u64, row: &ResultRow) -> u64 {
    derive_seed(
        seed,
        &format!(
            "bootstrap/{}/{}/{}/{}/{}/{}",
            row.model, row.x, row.y, row.layout, row.instruction_variant, row.answer_tokens
        ),
    )
}

/// Aggregates per-pair values, tests each mean against zero and applies
/// Holm-Bonferroni within each (model, panel, instruction, tokens) family.
/// Groups with no included pair are dropped with a warning.
pub fn compute_results(per_pair: &[PerPairRow], stats: &StatsSection, seed: u64) -> Result<Vec<ReportRow>> {
    let mut order: Vec<GroupKey> = Vec::new();
    let mut groups: HashMap<GroupKey, (Vec<f64>, usize)> = HashMap::new();
    for r in per_pair {
        let k = group_key(r);
        let g = groups.entry(k.clone()).or_insert_with(|| {
            order.push(k);
            (Vec::new(), 0)
        });
        match r.sp_pp {
            Some(v) => g.0.push(v),
            None => g.1 += 1,
        }
    }
    let mut rows = Vec::with_capacity(order.len());
    for k in order {
        let (values, excluded) = &groups[&k];
        let (model, panel, x, y, layout, instruction_variant, answer_tokens) = k.clone();
        if values.is_empty() {
            log::warn!("{model}: every pair of {x} vs {y} ({layout}) was excluded");
            continue;
        }
        let mut row = ResultRow {
            model,
            x,
            y,
            layout,
            instruction_variant,
            answer_tokens,
            sp_hat: values.iter().sum::<f64>() / values.len() as f64,
            n: values.len(),
            ci_low: 0.0,
            ci_high: 0.0,
            p_value: 1.0,
            excluded: *excluded,
            significant: false,
        };
        let cfg = BootstrapConfig { resamples: stats.resamples, seed: bootstrap_seed(seed, &row), confidence: stats.confidence };
        let t = bootstrap_test(values, &cfg)?;
        for w in &t.warnings {
            log::warn!("{} {} vs {}: {w}", row.model, row.x, row.y);
        }
        row.ci_low = t.ci_low;
        row.ci_high = t.ci_high;
        row.p_value = t.p_value;
        rows.push(ReportRow { panel, row });
    }
    let mut families: BTreeMap<(String, String, String, String), Vec<usize>> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        let key = (r.row.model.clone(), r.panel.clone(), r.row.instruction_variant.clone(), r.row.answer_tokens.clone());
        families.entry(key).or_default().push(i);
    }
    for idx in families.values() {
        let p: Vec<f64> = idx.iter().map(|&i| rows[i].row.p_value).collect();
        for (&i, rej) in idx.iter().zip(holm_bonferroni(&p, stats.alpha)?) {
            rows[i].row.significant = rej;
        }
    }
    Ok(rows)
}

/// Shift caused by repetition or majority relative to the plain pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub model: String,
    pub panel: String,
    pub x: String,
    pub y: String,
    pub layout: String,
    pub instruction_variant: String,
    pub answer_tokens: String,
    pub sp_with: f64,
    pub sp_without: f64,
    pub sp_gap: f64,
}

pub fn compute_gaps(rows: &[ReportRow]) -> Vec<GapRow> {
    let key = |r: &ReportRow, layout: &str| {
        (
            r.row.model.clone(),
            r.panel.clone(),
            r.row.x.clone(),
            r.row.y.clone(),
            layout.to_string(),
            r.row.instruction_variant.clone(),
            r.row.answer_tokens.clone(),
        )
    };
    let by_key: HashMap<_, &ReportRow> = rows.iter().map(|r| (key(r, &r.row.layout), r)).collect();
    rows.iter()
        .filter(|r| r.row.layout != "pair" && r.row.layout != "prompted")
        .filter_map(|r| {
            let base = by_key.get(&key(r, "pair"))?;
            Some(GapRow {
                model: r.row.model.clone(),
                panel: r.panel.clone(),
                x: r.row.x.clone(),
                y: r.row.y.clone(),
                layout: r.row.layout.clone(),
                instruction_variant: r.row.instruction_variant.clone(),
                answer_tokens: r.row.answer_tokens.clone(),
                sp_with: r.row.sp_hat,
                sp_without: base.row.sp_hat,
                sp_gap: (r.row.sp_hat - base.row.sp_hat).abs(),
            })
        })
        .collect()
}

/// How many models found a row significant, against the reporting quorum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub panel: String,
    pub x: String,
    pub y: String,
    pub layout: String,
    pub instruction_variant: String,
    pub answer_tokens: String,
    pub models: usize,
    pub significant_models: usize,
    pub quorum: usize,
    pub reported: bool,
}

pub fn compute_summary(rows: &[ReportRow], stats: &StatsSection) -> Vec<SummaryRow> {
    let mut order = Vec::new();
    let mut tally: HashMap<(String, String, String, String, String, String), (usize, usize)> = HashMap::new();
    for r in rows {
        let k = (
            r.panel.clone(),
            r.row.x.clone(),
            r.row.y.clone(),
            r.row.layout.clone(),
            r.row.instruction_variant.clone(),
            r.row.answer_tokens.clone(),
        );
        let e = tally.entry(k.clone()).or_insert_with(|| {
            order.push(k);
            (0, 0)
        });
        e.0 += 1;
        e.1 += usize::from(r.row.significant);
    }
    order
        .into_iter()
        .map(|k| {
            let (models, significant_models) = tally[&k];
            let quorum = stats.quorum_for(models);
            SummaryRow {
                panel: k.0,
                x: k.1,
                y: k.2,
                layout: k.3,
                instruction_variant: k.4,
                answer_tokens: k.5,
                models,
                significant_models,
                quorum,
                reported: significant_models >= quorum,
            }
        })
        .collect()
}

/// Hierarchies keyed by setting label, from the inter-type rows of each
/// setting and the attribution rows alongside them.
pub fn compute_hierarchies(rows: &[ReportRow]) -> Result<BTreeMap<String, Hierarchy>> {
    let types: Vec<String> = SourceType::INTER.iter().map(|t| t.as_str().to_string()).collect();
    let mut settings: BTreeMap<String, (Vec<ResultRow>, Vec<ResultRow>)> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.row.layout == "pair") {
        let label = format!("{}/{}", r.row.instruction_variant, r.row.answer_tokens);
        match r.panel.as_str() {
            "inter_type" => settings.entry(label).or_default().0.push(r.row.clone()),
            "attribution" => settings.entry(label).or_default().1.push(r.row.clone()),
            _ => {}
        }
    }
    settings
        .into_iter()
        .filter(|(_, (m, _))| !m.is_empty())
        .map(|(label, (m, a))| Ok((label, induce_hierarchy(&m, &a, &types)?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionBiasRow {
    pub model: String,
    pub probes: usize,
    /// Mean probability of the second option minus one half.
    pub position_bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub model: String,
    pub recognized_types_pct: f64,
    pub table_format_pct: f64,
    pub instruction_following_pct: f64,
    pub alternative_win_rate_pct: f64,
}

fn argmax_hits(probes: &[ProbeInstance], index: &ResultIndex<'_>) -> f64 {
    if probes.is_empty() {
        return f64::NAN;
    }
    let hits = probes
        .iter()
        .filter(|p| {
            let Some(norm) = index.get(p.probe_id.as_str()).and_then(|r| r.normalized.as_ref()) else { return false };
            let best = (0..norm.len()).fold(0, |b, i| if norm[i] > norm[b] { i } else { b });
            let unique = norm.iter().filter(|v| **v == norm[best]).count() == 1;
            unique && p.target_option == Some(best)
        })
        .count();
    to_pp(hits as f64 / probes.len() as f64)
}

pub fn validation_row(v: &ValidationProbes, outcome: &ModelOutcome) -> Result<ValidationRow> {
    let index = index_results(&outcome.results);
    let replies: HashMap<&str, &str> = outcome.replies.iter().map(|(k, r)| (k.as_str(), r.as_str())).collect();
    let followed = v
        .instruction_following
        .iter()
        .filter(|p| replies.get(p.probe_id.as_str()).is_some_and(|r| parse_short_answer(r, &p.tokens()).is_some()))
        .count();
    let instruction_following_pct = if v.instruction_following.is_empty() {
        f64::NAN
    } else {
        to_pp(followed as f64 / v.instruction_following.len() as f64)
    };
    let mut wins = 0.0;
    let mut counted = 0usize;
    for g in &v.plausibility {
        // Side B carries the perturbed value.
        match excluded_on_degenerate(side_a_mean(g, &index))? {
            Some(pa) => {
                counted += 1;
                let pb = 1.0 - pa;
                wins += if pb > 0.5 { 1.0 } else if pb == 0.5 { 0.5 } else { 0.0 };
            }
            None => {}
        }
    }
    Ok(ValidationRow {
        model: outcome.model.clone(),
        recognized_types_pct: argmax_hits(&v.recognizability, &index),
        table_format_pct: argmax_hits(&v.table_format, &index),
        instruction_following_pct,
        alternative_win_rate_pct: if counted == 0 { f64::NAN } else { to_pp(wins / counted as f64) },
    })
}

/// Everything derived from per-pair values alone.
#[derive(Debug, Clone)]
pub struct Reports {
    pub per_pair: Vec<PerPairRow>,
    pub results: Vec<ReportRow>,
    pub gaps: Vec<GapRow>,
    pub summary: Vec<SummaryRow>,
    pub hierarchy: BTreeMap<String, Hierarchy>,
}

pub fn derive_reports(per_pair: Vec<PerPairRow>, stats: &StatsSection, seed: u64) -> Result<Reports> {
    let results = compute_results(&per_pair, stats, seed)?;
    let gaps = compute_gaps(&results);
    let summary = compute_summary(&results, stats);
    let hierarchy = compute_hierarchies(&results)?;
    Ok(Reports { per_pair, results, gaps, summary, hierarchy })
}

/// An experiment evaluated on every configured model, before any file is
/// written.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub experiment: Experiment,
    pub set: ProbeSet,
    pub outcomes: Vec<ModelOutcome>,
    pub reports: Reports,
    pub position_bias: Vec<PositionBiasRow>,
    pub validation: Vec<ValidationRow>,
}

impl Evaluation {
    pub fn rows(&self) -> impl Iterator<Item = &ResultRow> {
        self.reports.results.iter().map(|r| &r.row)
    }
}

/// Builds the probe set (failing before any request), queries each model and
/// computes every report.
pub fn execute(cfg: &RunConfig, inputs: &Inputs, experiment: Experiment, gateways: &[Gateway]) -> Result<Evaluation> {
    cfg.validate()?;
    if gateways.is_empty() {
        return Err(RunnerError::Config("no models configured".into()));
    }
    let set = Builder::new(inputs, cfg).build(experiment)?;
    let mut outcomes = Vec::with_capacity(gateways.len());
    let mut per_pair = Vec::new();
    let mut bias = Vec::new();
    let mut validation = Vec::new();
    let unattributed = set.unattributed_probes();
    for g in gateways {
        let outcome = evaluate(&set, g)?;
        per_pair.extend(per_pair_rows(&set, &outcome)?);
        if !unattributed.is_empty() {
            let index = index_results(&outcome.results);
            match position_bias(&unattributed, &index) {
                Ok(b) => bias.push(PositionBiasRow { model: outcome.model.clone(), probes: unattributed.len(), position_bias: b }),
                Err(MetricError::EmptyDataset) => log::warn!("{}: every unattributed probe was degenerate", outcome.model),
                Err(e) => return Err(e.into()),
            }
        }
        if let Some(v) = &set.validation {
            validation.push(validation_row(v, &outcome)?);
        }
        outcomes.push(outcome);
    }
    let reports = derive_reports(per_pair, &cfg.stats, cfg.run.seed)?;
    Ok(Evaluation { experiment, set, outcomes, reports, position_bias: bias, validation })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointMeta {
    pub model_id: String,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_url: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub served_model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chat_template: Option<String>,
    /// Name of the credential variable; its value is never recorded.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mock: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: Experiment,
    pub config_digest: String,
    pub code_version: String,
    pub seed: u64,
    pub sample: Option<usize>,
    pub input_digests: BTreeMap<String, String>,
    pub endpoints: Vec<EndpointMeta>,
    pub conflict_pairs: usize,
    pub probe_counts: BTreeMap<String, usize>,
    /// Degenerate probe responses per model.
    pub degenerate_probes: BTreeMap<String, usize>,
    /// Excluded pairs per model, summed over rows.
    pub excluded_pairs: BTreeMap<String, usize>,
    pub cache_hits: BTreeMap<String, usize>,
    pub bootstrap: StatsSection,
    pub started_unix: u64,
    pub finished_unix: u64,
}

pub fn endpoint_meta(cfg: &RunConfig) -> Result<Vec<EndpointMeta>> {
    let mut out = Vec::new();
    for m in &cfg.mocks {
        out.push(EndpointMeta {
            model_id: m.id.clone(),
            kind: "mock".into(),
            base_url: None,
            served_model: None,
            chat_template: None,
            api_key_env: None,
            mock: Some(serde_json::to_value(m)?),
        });
    }
    for e in &cfg.endpoints {
        out.push(EndpointMeta {
            model_id: e.model_id.clone(),
            kind: "http".into(),
            base_url: Some(e.base_url.clone()),
            served_model: e.served_model.clone(),
            chat_template: e.chat_template.clone(),
            api_key_env: e.api_key_env.clone(),
            mock: None,
        });
    }
    Ok(out)
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub const PER_PAIR_COLUMNS: [&str; 9] =
    ["model", "panel", "x", "y", "layout", "instruction_variant", "answer_tokens", "pair_id", "sp_pp"];
const GAP_COLUMNS: [&str; 10] = [
    "model",
    "panel",
    "x",
    "y",
    "layout",
    "instruction_variant",
    "answer_tokens",
    "sp_with",
    "sp_without",
    "sp_gap",
];
const SUMMARY_COLUMNS: [&str; 10] = [
    "panel",
    "x",
    "y",
    "layout",
    "instruction_variant",
    "answer_tokens",
    "models",
    "significant_models",
    "quorum",
    "reported",
];

/// Writes the files derivable from per-pair values.
pub fn write_reports(dir: &Path, reports: &Reports) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_csv(&dir.join("per_pair.csv"), &reports.per_pair, &PER_PAIR_COLUMNS)?;
    let rows: Vec<&ResultRow> = reports.results.iter().map(|r| &r.row).collect();
    write_csv(&dir.join("results.csv"), &rows, &RESULT_COLUMNS)?;
    write_csv(&dir.join("gaps.csv"), &reports.gaps, &GAP_COLUMNS)?;
    write_csv(&dir.join("summary.csv"), &reports.summary, &SUMMARY_COLUMNS)?;
    if !reports.hierarchy.is_empty() {
        fs::write(dir.join("hierarchy.json"), serde_json::to_vec_pretty(&reports.hierarchy)?)?;
    }
    Ok(())
}

/// Response archive line; transport timing is left out so reruns match.
#[derive(Serialize)]
struct ResponseRecord<'a> {
    model_id: &'a str,
    probe_id: &'a str,
    raw_probs: &'a BTreeMap<String, f64>,
    normalized: &'a Option<Vec<f64>>,
}

fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, &item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_evaluation(dir: &Path, eval: &Evaluation) -> Result<()> {
    write_reports(dir, &eval.reports)?;
    write_csv(&dir.join("position_bias.csv"), &eval.position_bias, &["model", "probes", "position_bias"])?;
    if !eval.validation.is_empty() {
        write_csv(
            &dir.join("validation.csv"),
            &eval.validation,
            &[
                "model",
                "recognized_types_pct",
                "table_format_pct",
                "instruction_following_pct",
                "alternative_win_rate_pct",
            ],
        )?;
    }
    write_jsonl(&dir.join("probes.jsonl"), eval.set.probes())?;
    write_jsonl(
        &dir.join("responses.jsonl"),
        eval.outcomes.iter().flat_map(|o| {
            o.results.iter().map(|r| ResponseRecord {
                model_id: &r.model_id,
                probe_id: &r.probe_id,
                raw_probs: &r.raw_probs,
                normalized: &r.normalized,
            })
        }),
    )?;
    Ok(())
}

fn probe_counts(set: &ProbeSet) -> BTreeMap<String, usize> {
    let mut c = BTreeMap::new();
    c.insert("distinct".into(), set.probes().len());
    c.insert("attributed".into(), set.attributed_count());
    c.insert(
        "unattributed".into(),
        set.matchups.iter().flat_map(|m| &m.pairs).map(|p| p.unattributed.len()).sum(),
    );
    c.insert("prompted".into(), set.prompted.iter().flat_map(|p| &p.groups).map(Vec::len).sum());
    if let Some(v) = &set.validation {
        c.insert("recognizability".into(), v.recognizability.len());
        c.insert("table_format".into(), v.table_format.len());
        c.insert("instruction_following".into(), v.instruction_following.len());
        c.insert("plausibility".into(), v.plausibility.iter().map(Vec::len).sum());
    }
    c
}

/// Runs one experiment end to end and writes its reports under
/// `<output_dir>/<experiment>/`.
pub fn run_experiment(cfg: &RunConfig, inputs: &Inputs, experiment: Experiment) -> Result<(PathBuf, Evaluation)> {
    let started_unix = unix_now();
    let dir = cfg.run.output_dir.join(experiment.as_str());
    let archive = cfg.run.archive.then(|| dir.join("archive"));
    let gateways = build_gateways(cfg, archive.as_deref())?;
    let eval = execute(cfg, inputs, experiment, &gateways)?;
    write_evaluation(&dir, &eval)?;
    let mut excluded_pairs = BTreeMap::new();
    for r in eval.rows() {
        *excluded_pairs.entry(r.model.clone()).or_insert(0) += r.excluded;
    }
    let manifest = RunManifest {
        experiment,
        config_digest: cfg.digest(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.run.seed,
        sample: cfg.run.sample,
        input_digests: inputs.digests.clone(),
        endpoints: endpoint_meta(cfg)?,
        conflict_pairs: inputs.pairs.len(),
        probe_counts: probe_counts(&eval.set),
        degenerate_probes: eval.outcomes.iter().map(|o| (o.model.clone(), o.degenerate())).collect(),
        excluded_pairs,
        cache_hits: eval.outcomes.iter().map(|o| (o.model.clone(), o.cache_hits())).collect(),
        bootstrap: cfg.stats.clone(),
        started_unix,
        finished_unix: unix_now(),
    };
    fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    Ok((dir, eval))
}

pub fn read_per_pair(path: &Path) -> Result<Vec<PerPairRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != PER_PAIR_COLUMNS {
        return Err(RunnerError::Config(format!("{} has header {header:?}", path.display())));
    }
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Recomputes tests, gaps, summary and hierarchy from `per_pair.csv`.
pub fn restat(dir: &Path, stats: &StatsSection, seed: u64) -> Result<Reports> {
    let per_pair = read_per_pair(&dir.join("per_pair.csv"))?;
    let reports = derive_reports(per_pair, stats, seed)?;
    write_reports(dir, &reports)?;
    Ok(reports)
}
