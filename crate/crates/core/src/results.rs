//! Per-probe model outputs and the results-table row contract.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::metrics::normalize_all;
use crate::prompt::ProbeInstance;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TransportMeta {
    pub latency_ms: u64,
    pub retries: u32,
    pub cache_hit: bool,
}

/// Answer-token probabilities for one probe on one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub probe_id: String,
    pub model_id: String,
    /// Token → first-position probability.
    pub raw_probs: BTreeMap<String, f64>,
    /// Probabilities renormalized over the probe's options, in option order.
    /// `None` when every option has zero mass.
    pub normalized: Option<Vec<f64>>,
    #[serde(default)]
    pub transport: TransportMeta,
}

impl ProbeResult {
    /// `raw` must hold one probability per option token of `probe`.
    pub fn new(probe: &ProbeInstance, model_id: &str, raw: BTreeMap<String, f64>, transport: TransportMeta) -> Self {
        let ordered: Vec<f64> = probe.options.iter().map(|o| raw.get(&o.token).copied().unwrap_or(0.0)).collect();
        Self {
            probe_id: probe.probe_id.clone(),
            model_id: model_id.to_string(),
            raw_probs: raw,
            normalized: normalize_all(&ordered).ok(),
            transport,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.normalized.is_none()
    }
}

/// Column order of the results table.
pub const RESULT_COLUMNS: [&str; 13] = [
    "model",
    "x",
    "y",
    "layout",
    "instruction_variant",
    "answer_tokens",
    "sp_hat",
    "n",
    "ci_low",
    "ci_high",
    "p_value",
    "excluded",
    "significant",
];

/// One row of the results table. `x` is the right-hand-side source type;
/// `sp_hat` and the interval are in percentage points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub model: String,
    pub x: String,
    pub y: String,
    pub layout: String,
    pub instruction_variant: String,
    pub answer_tokens: String,
    pub sp_hat: f64,
    pub n: usize,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: f64,
    pub excluded: usize,
    pub significant: bool,
}

/// JSON Schema for one results-table row, shared with downstream consumers.
pub const RESULT_ROW_SCHEMA: &str = include_str!("../schemas/result_row.schema.json");

/// Checks a results-table header against [`RESULT_COLUMNS`].
pub fn check_result_header<'a>(header: impl IntoIterator<Item = &'a str>) -> Result<(), String> {
    let got: Vec<&str> = header.into_iter().collect();
    if got == RESULT_COLUMNS {
        Ok(())
    } else {
        Err(format!("expected columns {:?}, found {:?}", RESULT_COLUMNS, got))
    }
}
