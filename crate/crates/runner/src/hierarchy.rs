//! Cross-model source hierarchy from pairwise matchup results.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use srcpref_core::results::ResultRow;
use srcpref_stats::{attribution_rank, kendall_tau, kendall_w, stv_rank, AttributionRanking, Ballot};

use crate::error::{Result, RunnerError};

/// One model's ordering of the source types, built from Copeland scores over
/// the signs of its pairwise ŜP values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBallot {
    pub model: String,
    pub order: Vec<String>,
    pub copeland: BTreeMap<String, f64>,
    /// Every matchup has a strict winner and the wins form a total order.
    pub transitive: bool,
    /// Equal Copeland scores were separated by net margin or by name.
    pub tie_broken: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelAttribution {
    pub model: String,
    pub ranking: AttributionRanking,
    /// Agreement with the matchup ballot; `None` when undefined.
    pub tau_vs_matchups: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hierarchy {
    pub types: Vec<String>,
    pub ballots: Vec<ModelBallot>,
    pub order: Vec<String>,
    /// Concordance across models; needs at least two.
    pub kendall_w: Option<f64>,
    pub non_transitive: Vec<String>,
    pub attribution: Vec<ModelAttribution>,
}

/// Signed ŜP of `a` over `b` for one model; reversed rows are negated.
fn lookup(sp: &BTreeMap<(String, String), f64>, model: &str, a: &str, b: &str) -> Result<f64> {
    if let Some(v) = sp.get(&(a.to_string(), b.to_string())) {
        return Ok(*v);
    }
    if let Some(v) = sp.get(&(b.to_string(), a.to_string())) {
        return Ok(-*v);
    }
    Err(RunnerError::MissingMatchup(a.to_string(), b.to_string(), model.to_string()))
}

pub fn model_ballot(model: &str, types: &[String], sp: &BTreeMap<(String, String), f64>) -> Result<ModelBallot> {
    let mut copeland: BTreeMap<String, f64> = types.iter().map(|t| (t.clone(), 0.0)).collect();
    let mut margin: BTreeMap<String, f64> = copeland.clone();
    let mut strict = true;
    for (i, a) in types.iter().enumerate() {
        for b in &types[i + 1..] {
            let v = lookup(sp, model, a, b)?;
            *margin.get_mut(a).expect("type") += v;
            *margin.get_mut(b).expect("type") -= v;
            if v > 0.0 {
                *copeland.get_mut(a).expect("type") += 1.0;
            } else if v < 0.0 {
                *copeland.get_mut(b).expect("type") += 1.0;
            } else {
                strict = false;
                *copeland.get_mut(a).expect("type") += 0.5;
                *copeland.get_mut(b).expect("type") += 0.5;
            }
        }
    }
    let mut order = types.to_vec();
    order.sort_by(|a, b| {
        copeland[b].total_cmp(&copeland[a]).then(margin[b].total_cmp(&margin[a])).then_with(|| a.cmp(b))
    });
    let distinct: BTreeSet<u64> = copeland.values().map(|v| v.to_bits()).collect();
    let tie_broken = distinct.len() < types.len();
    Ok(ModelBallot { model: model.to_string(), order, copeland, transitive: strict && !tie_broken, tie_broken })
}

fn positions(order: &[String], types: &[String]) -> Vec<f64> {
    types.iter().map(|t| order.iter().position(|o| o == t).unwrap_or(order.len()) as f64).collect()
}

/// Builds one ballot per model from the pairwise rows, ranks the source
/// types by STV and measures agreement. `attribution` rows (type vs no
/// source) are optional.
pub fn induce_hierarchy(matchups: &[ResultRow], attribution: &[ResultRow], types: &[String]) -> Result<Hierarchy> {
    if types.len() < 2 {
        return Err(RunnerError::Config("a hierarchy needs at least two source types".into()));
    }
    let mut per_model: BTreeMap<&str, BTreeMap<(String, String), f64>> = BTreeMap::new();
    for r in matchups {
        per_model.entry(&r.model).or_default().insert((r.x.clone(), r.y.clone()), r.sp_hat);
    }
    if per_model.is_empty() {
        return Err(RunnerError::Config("no matchup results to rank".into()));
    }
    let ballots = per_model
        .iter()
        .map(|(m, sp)| model_ballot(m, types, sp))
        .collect::<Result<Vec<_>>>()?;
    let stv: Vec<Ballot> = ballots.iter().map(|b| Ballot::strict(b.model.clone(), &b.order)).collect();
    let order = stv_rank(&stv)?;
    let kendall_w = if ballots.len() >= 2 {
        let rows: Vec<Vec<f64>> = ballots.iter().map(|b| positions(&b.order, types)).collect();
        Some(kendall_w(&rows)?)
    } else {
        None
    };
    let non_transitive = ballots.iter().filter(|b| !b.transitive).map(|b| b.model.clone()).collect();

    let mut scores: BTreeMap<&str, BTreeMap<String, f64>> = BTreeMap::new();
    for r in attribution {
        if types.contains(&r.x) {
            scores.entry(&r.model).or_default().insert(r.x.clone(), r.sp_hat);
        }
    }
    let attribution = scores
        .into_iter()
        .map(|(model, s)| {
            let ranking = attribution_rank(&s);
            let tau_vs_matchups = ballots.iter().find(|b| b.model == model).and_then(|b| {
                (ranking.order.len() == types.len())
                    .then(|| kendall_tau(&positions(&ranking.order, types), &positions(&b.order, types)).ok())
                    .flatten()
            });
            ModelAttribution { model: model.to_string(), ranking, tau_vs_matchups }
        })
        .collect();
    Ok(Hierarchy { types: types.to_vec(), ballots, order, kendall_w, non_transitive, attribution })
}
