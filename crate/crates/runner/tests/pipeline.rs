use std::fs;
use std::path::Path;

use srcpref_core::results::RESULT_COLUMNS;
use srcpref_gateway::{MockModel, ModelEndpoint};
use srcpref_runner::catalog::{Builder, Experiment};
use srcpref_runner::config::RunConfig;
use srcpref_runner::data::load_inputs;
use srcpref_runner::execute::{restat, run_experiment};
use srcpref_runner::RunnerError;

const PAIRS: usize = 24;

fn config(out: &Path, mocks: Vec<MockModel>) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.run.seed = 11;
    cfg.run.sample = Some(PAIRS);
    cfg.run.output_dir = out.to_path_buf();
    cfg.run.cache_dir = Some(out.join("cache"));
    cfg.stats.resamples = 500;
    cfg.mocks = mocks;
    cfg
}

fn mocks() -> Vec<MockModel> {
    vec![
        MockModel::source_affinity("Registry", 0.3).unwrap(),
        MockModel::position_biased(0.4).unwrap(),
        MockModel::table_majority(0.2).unwrap(),
    ]
}

const REPORTS: [&str; 7] = [
    "per_pair.csv",
    "results.csv",
    "gaps.csv",
    "summary.csv",
    "position_bias.csv",
    "probes.jsonl",
    "responses.jsonl",
];

#[test]
fn attribution_builds_two_orders_per_type_and_pair() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), mocks());
    let inputs = load_inputs(&cfg).unwrap();
    let set = Builder::new(&inputs, &cfg).build(Experiment::Attribution).unwrap();
    assert_eq!(set.matchups.len(), 4);
    assert_eq!(set.attributed_count(), PAIRS * 4 * 2);
}

#[test]
fn end_to_end_mock_run_writes_consistent_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), mocks());
    let inputs = load_inputs(&cfg).unwrap();
    let (out, eval) = run_experiment(&cfg, &inputs, Experiment::InterType).unwrap();
    for f in REPORTS.iter().chain(&["manifest.json", "hierarchy.json"]) {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let mut reader = csv::Reader::from_path(out.join("results.csv")).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(str::to_string).collect();
    assert_eq!(header, RESULT_COLUMNS);
    assert_eq!(reader.records().count(), 3 * 6);
    for r in eval.rows() {
        assert_eq!(r.n + r.excluded, PAIRS, "{} {} vs {}", r.model, r.x, r.y);
        assert!(r.ci_low <= r.sp_hat && r.sp_hat <= r.ci_high);
    }
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["conflict_pairs"], PAIRS);
    assert_eq!(manifest["endpoints"].as_array().unwrap().len(), 3);
}

#[test]
fn rerun_from_warm_cache_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), mocks());
    let inputs = load_inputs(&cfg).unwrap();
    let (out, first) = run_experiment(&cfg, &inputs, Experiment::MajorityRepetition).unwrap();
    assert!(first.outcomes.iter().all(|o| o.cache_hits() == 0));
    let before: Vec<Vec<u8>> = REPORTS.iter().map(|f| fs::read(out.join(f)).unwrap()).collect();
    let (_, second) = run_experiment(&cfg, &inputs, Experiment::MajorityRepetition).unwrap();
    assert!(second.outcomes.iter().all(|o| o.cache_hits() == o.results.len()));
    for (f, b) in REPORTS.iter().zip(before) {
        assert_eq!(fs::read(out.join(f)).unwrap(), b, "{f} changed");
    }
}

#[test]
fn restat_reproduces_results_from_per_pair_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), mocks());
    let inputs = load_inputs(&cfg).unwrap();
    let (out, eval) = run_experiment(&cfg, &inputs, Experiment::Attribution).unwrap();
    let results = fs::read(out.join("results.csv")).unwrap();
    let gaps = fs::read(out.join("gaps.csv")).unwrap();
    let reports = restat(&out, &cfg.stats, cfg.run.seed).unwrap();
    assert_eq!(reports.results, eval.reports.results);
    assert_eq!(fs::read(out.join("results.csv")).unwrap(), results);
    assert_eq!(fs::read(out.join("gaps.csv")).unwrap(), gaps);
}

#[test]
fn fixed_reply_counts_as_instruction_following() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), vec![MockModel::uniform().with_reply("B")]);
    let inputs = load_inputs(&cfg).unwrap();
    let (_, eval) = run_experiment(&cfg, &inputs, Experiment::Validation).unwrap();
    let v = &eval.validation[0];
    assert_eq!(v.instruction_following_pct, 100.0);
    assert_eq!(v.alternative_win_rate_pct, 50.0);
    assert_eq!(v.table_format_pct, 0.0);
}

#[test]
fn invalid_endpoint_fails_before_any_request() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), vec![]);
    let mut endpoint = ModelEndpoint::new("unreachable", "http://127.0.0.1:9/v1");
    endpoint.chat_template = Some("no-such-template".into());
    cfg.endpoints.push(endpoint);
    assert!(cfg.validate().is_err());
    let inputs = load_inputs(&cfg).unwrap();
    let err = run_experiment(&cfg, &inputs, Experiment::Attribution).unwrap_err();
    assert!(matches!(err, RunnerError::Gateway(_)), "{err}");
    assert!(!dir.path().join("attribution").join("results.csv").exists());
}

#[test]
fn config_rejects_duplicate_models_and_bad_parameters() {
    let dup = "[[mocks]]\nid = \"m\"\nkind = \"uniform\"\n[[mocks]]\nid = \"m\"\nkind = \"uniform\"\n";
    assert!(matches!(RunConfig::parse(dup), Err(RunnerError::Config(_))));
    let beta = "[[mocks]]\nid = \"m\"\nkind = \"position_biased\"\nbeta = 1.5\n";
    assert!(RunConfig::parse(beta).is_err());
    let ok = "[run]\nseed = 3\n[[mocks]]\nid = \"a\"\nkind = \"source_affinity\"\nkeyword = \"Civil Registry\"\nstrength = 0.3\n";
    let cfg = RunConfig::parse(ok).unwrap();
    assert_eq!(cfg.model_ids(), ["a"]);
}
