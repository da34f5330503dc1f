use std::collections::BTreeSet;

use srcpref_core::results::ResultRow;
use srcpref_runner::hierarchy::{induce_hierarchy, model_ballot};
use srcpref_runner::RunnerError;

const TYPES: [&str; 4] = ["government", "newspaper", "person", "social_media"];

fn types() -> Vec<String> {
    TYPES.iter().map(|t| t.to_string()).collect()
}

fn row(model: &str, x: &str, y: &str, sp_hat: f64) -> ResultRow {
    ResultRow {
        model: model.into(),
        x: x.into(),
        y: y.into(),
        layout: "pair".into(),
        instruction_variant: "default".into(),
        answer_tokens: "AB".into(),
        sp_hat,
        n: 100,
        ci_low: sp_hat - 1.0,
        ci_high: sp_hat + 1.0,
        p_value: 0.01,
        excluded: 0,
        significant: true,
    }
}

/// Pairwise rows for a model that prefers types in the given order.
fn ranked(model: &str, order: &[&str]) -> Vec<ResultRow> {
    let mut out = Vec::new();
    for (i, a) in order.iter().enumerate() {
        for (j, b) in order.iter().enumerate().skip(i + 1) {
            out.push(row(model, a, b, 5.0 * (j - i) as f64));
        }
    }
    out
}

fn fixture() -> Vec<ResultRow> {
    let mut rows = ranked("m1", &["government", "newspaper", "person", "social_media"]);
    rows.extend(ranked("m2", &["government", "newspaper", "social_media", "person"]));
    rows.extend(ranked("m3", &["newspaper", "government", "person", "social_media"]));
    rows.extend(ranked("m4", &["government", "newspaper", "social_media", "person"]));
    rows.extend(ranked("m5", &["government", "person", "newspaper", "social_media"]));
    rows
}

#[test]
fn fixture_ballots_put_government_over_newspaper_over_the_rest() {
    let h = induce_hierarchy(&fixture(), &[], &types()).unwrap();
    assert_eq!(h.order[..2], ["government", "newspaper"]);
    let tail: BTreeSet<&str> = h.order[2..].iter().map(String::as_str).collect();
    assert_eq!(tail, BTreeSet::from(["person", "social_media"]));
    assert!(h.non_transitive.is_empty());
    let w = h.kendall_w.unwrap();
    assert!(w > 0.0 && w < 1.0, "{w}");
}

#[test]
fn single_model_hierarchy_is_its_ballot_without_concordance() {
    let rows = ranked("only", &["person", "government", "social_media", "newspaper"]);
    let h = induce_hierarchy(&rows, &[], &types()).unwrap();
    assert_eq!(h.order, ["person", "government", "social_media", "newspaper"]);
    assert_eq!(h.kendall_w, None);
}

#[test]
fn row_and_model_order_do_not_matter() {
    let rows = fixture();
    let reference = induce_hierarchy(&rows, &[], &types()).unwrap();
    let mut reversed = rows.clone();
    reversed.reverse();
    assert_eq!(induce_hierarchy(&reversed, &[], &types()).unwrap(), reference);
    let mut rotated = rows.clone();
    rotated.rotate_left(7);
    assert_eq!(induce_hierarchy(&rotated, &[], &types()).unwrap(), reference);
}

#[test]
fn reversed_matchups_are_negated() {
    let mut rows = ranked("m", &["government", "newspaper", "person", "social_media"]);
    for r in &mut rows {
        std::mem::swap(&mut r.x, &mut r.y);
        r.sp_hat = -r.sp_hat;
    }
    let h = induce_hierarchy(&rows, &[], &types()).unwrap();
    assert_eq!(h.order, TYPES);
}

#[test]
fn missing_matchup_is_an_error() {
    let mut rows = ranked("m", &["government", "newspaper", "person", "social_media"]);
    rows.retain(|r| !(r.x == "newspaper" && r.y == "person"));
    match induce_hierarchy(&rows, &[], &types()) {
        Err(RunnerError::MissingMatchup(a, b, m)) => {
            assert_eq!((a.as_str(), b.as_str(), m.as_str()), ("newspaper", "person", "m"));
        }
        other => panic!("expected a missing matchup, got {other:?}"),
    }
}

#[test]
fn cycles_are_flagged_non_transitive() {
    let rows = vec![
        row("c", "government", "newspaper", 4.0),
        row("c", "newspaper", "person", 4.0),
        row("c", "person", "government", 4.0),
    ];
    let t: Vec<String> = TYPES[..3].iter().map(|t| t.to_string()).collect();
    let h = induce_hierarchy(&rows, &[], &t).unwrap();
    assert_eq!(h.non_transitive, ["c"]);
    assert!(h.ballots[0].tie_broken);
}

#[test]
fn zero_sp_splits_the_copeland_point() {
    let mut sp = std::collections::BTreeMap::new();
    sp.insert(("government".to_string(), "newspaper".to_string()), 0.0);
    let b = model_ballot("z", &types()[..2], &sp).unwrap();
    assert_eq!(b.copeland["government"], 0.5);
    assert_eq!(b.copeland["newspaper"], 0.5);
    assert!(!b.transitive);
}

#[test]
fn attribution_ranking_agrees_with_matchups() {
    let rows = ranked("m", &TYPES);
    let attribution: Vec<ResultRow> =
        TYPES.iter().enumerate().map(|(i, t)| row("m", t, "none", 20.0 - 5.0 * i as f64)).collect();
    let h = induce_hierarchy(&rows, &attribution, &types()).unwrap();
    assert_eq!(h.attribution.len(), 1);
    assert_eq!(h.attribution[0].tau_vs_matchups, Some(1.0));
}
