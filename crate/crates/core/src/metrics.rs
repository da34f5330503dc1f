//! Source-preference metrics.
//!
//! Per-pair values are kept on the probability scale; [`to_pp`] is the only
//! place values are converted to percentage points.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::MetricError;
use crate::prompt::{ProbeInstance, Side};
use crate::results::ProbeResult;

type Result<T> = std::result::Result<T, MetricError>;

const PP_PER_UNIT: f64 = 100.0;

pub fn to_pp(p: f64) -> f64 {
    p * PP_PER_UNIT
}

pub fn from_pp(v: f64) -> f64 {
    v / PP_PER_UNIT
}

/// `a / (a + b)`.
pub fn normalize(a: f64, b: f64) -> Result<f64> {
    Ok(normalize_all(&[a, b])?[0])
}

pub fn normalize_all(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(MetricError::DegenerateInput(format!("probabilities must be finite and non-negative: {raw:?}")));
    }
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(MetricError::DegenerateProbs);
    }
    Ok(raw.iter().map(|p| p / total).collect())
}

/// Normalized probability of the option bound to `side`.
pub fn side_probability(probe: &ProbeInstance, result: &ProbeResult, side: Side) -> Result<f64> {
    let idx = probe
        .option_for(side)
        .ok_or_else(|| MetricError::IncompleteMeasurement(format!("probe {} has no option for {side:?}", probe.probe_id)))?;
    let norm = result.normalized.as_ref().ok_or(MetricError::DegenerateProbs)?;
    norm.get(idx).copied().ok_or_else(|| MetricError::IncompleteMeasurement(format!("probe {} result lacks option {idx}", probe.probe_id)))
}

/// The attributed (C') and unattributed (C) probes of one conflict pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairProbes {
    pub pair_id: String,
    pub attributed: Vec<ProbeInstance>,
    pub unattributed: Vec<ProbeInstance>,
}

/// Side-A probabilities under every presented order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairMeasurement {
    pub pair_id: String,
    pub p_attributed: Vec<f64>,
    pub p_unattributed: Vec<f64>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

impl PairMeasurement {
    /// Order-averaged `P(A|C') − P(A|C)` on the probability scale. When both
    /// conditions share the same orders this equals the mean of per-order
    /// differences.
    pub fn sp(&self) -> Result<f64> {
        if self.p_attributed.is_empty() || self.p_unattributed.is_empty() {
            return Err(MetricError::IncompleteMeasurement(format!("pair {} lacks a condition", self.pair_id)));
        }
        Ok(mean(&self.p_attributed) - mean(&self.p_unattributed))
    }
}

pub type ResultIndex<'a> = HashMap<&'a str, &'a ProbeResult>;

pub fn index_results(results: &[ProbeResult]) -> ResultIndex<'_> {
    results.iter().map(|r| (r.probe_id.as_str(), r)).collect()
}

fn lookup<'a>(results: &ResultIndex<'a>, probe: &ProbeInstance) -> Result<&'a ProbeResult> {
    results
        .get(probe.probe_id.as_str())
        .copied()
        .ok_or_else(|| MetricError::IncompleteMeasurement(format!("no result for probe {}", probe.probe_id)))
}

pub fn measure_pair(probes: &PairProbes, results: &ResultIndex<'_>) -> Result<PairMeasurement> {
    let collect = |ps: &[ProbeInstance]| -> Result<Vec<f64>> {
        ps.iter().map(|p| side_probability(p, lookup(results, p)?, Side::A)).collect()
    };
    Ok(PairMeasurement {
        pair_id: probes.pair_id.clone(),
        p_attributed: collect(&probes.attributed)?,
        p_unattributed: collect(&probes.unattributed)?,
    })
}

/// Identifies one aggregated matchup.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpKey {
    pub model_id: String,
    /// Right-hand-side source type (carried by table A).
    pub x: String,
    pub y: String,
    pub layout: String,
    pub instruction_variant: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateSp {
    pub key: SpKey,
    /// Mean SP in percentage points.
    pub sp_hat: f64,
    pub n: usize,
    /// Pairs dropped because a probe had zero mass on every option.
    pub excluded: usize,
    /// Per-pair SP in percentage points.
    pub per_pair: Vec<f64>,
}

/// Mean SP over the dataset. Degenerate pairs are excluded and counted.
pub fn sp_hat(key: SpKey, pairs: &[PairProbes], results: &ResultIndex<'_>) -> Result<AggregateSp> {
    let mut per_pair = Vec::with_capacity(pairs.len());
    let mut excluded = 0;
    for p in pairs {
        match measure_pair(p, results).and_then(|m| m.sp()) {
            Ok(v) => per_pair.push(to_pp(v)),
            Err(MetricError::DegenerateProbs) => excluded += 1,
            Err(e) => return Err(e),
        }
    }
    aggregate(key, per_pair, excluded)
}

/// Builds an aggregate from per-pair SP values already in percentage points.
pub fn aggregate(key: SpKey, per_pair: Vec<f64>, excluded: usize) -> Result<AggregateSp> {
    if per_pair.is_empty() {
        return Err(MetricError::EmptyDataset);
    }
    Ok(AggregateSp { key, sp_hat: mean(&per_pair), n: per_pair.len(), excluded, per_pair })
}

/// `|ŜP_with − ŜP_without|` for the same model, sources and instruction.
pub fn sp_gap(with: &AggregateSp, without: &AggregateSp) -> Result<f64> {
    let (a, b) = (&with.key, &without.key);
    if a.model_id != b.model_id || a.x != b.x || a.y != b.y || a.instruction_variant != b.instruction_variant {
        return Err(MetricError::KeyMismatch(format!("{a:?} vs {b:?}")));
    }
    Ok((with.sp_hat - without.sp_hat).abs())
}

/// Mean probability of the second option minus one half, over non-degenerate
/// probes.
pub fn position_bias(probes: &[ProbeInstance], results: &ResultIndex<'_>) -> Result<f64> {
    let mut ps = Vec::new();
    for p in probes {
        let r = lookup(results, p)?;
        if let Some(norm) = &r.normalized {
            let pb = norm.get(1).ok_or_else(|| MetricError::IncompleteMeasurement(format!("probe {} has one option", p.probe_id)))?;
            ps.push(*pb);
        }
    }
    if ps.is_empty() {
        return Err(MetricError::EmptyDataset);
    }
    Ok(mean(&ps) - 0.5)
}

/// Deviation from 50 % of the side-A (right-hand) source's option, in
/// percentage points. Each inner slice holds the orders of one source pair.
pub fn prompted_deviation(groups: &[Vec<ProbeInstance>], results: &ResultIndex<'_>) -> Result<f64> {
    let mut per_group = Vec::new();
    for g in groups {
        let ps: Vec<f64> = g
            .iter()
            .map(|p| side_probability(p, lookup(results, p)?, Side::A))
            .collect::<Result<_>>()?;
        if ps.is_empty() {
            return Err(MetricError::IncompleteMeasurement("empty prompted group".into()));
        }
        per_group.push(mean(&ps));
    }
    if per_group.is_empty() {
        return Err(MetricError::EmptyDataset);
    }
    Ok(to_pp(mean(&per_group) - 0.5))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeKind {
    Reduction,
    Retention,
}

pub fn percent_change(before: f64, after: f64, kind: ChangeKind) -> Result<f64> {
    if before == 0.0 || !before.is_finite() || !after.is_finite() {
        return Err(MetricError::DegenerateInput(format!("before = {before}, after = {after}")));
    }
    Ok(match kind {
        ChangeKind::Reduction => to_pp((before - after) / before),
        ChangeKind::Retention => to_pp(after / before),
    })
}
