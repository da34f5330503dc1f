//! Acceptance suite: one PASS/FAIL line per criterion, mocks only, no network.
//!
//! Set `SRCPREF_RELEASED_DIR` to a directory holding the released
//! `entities.jsonl` and `alternatives.jsonl` to also check the released
//! mitigation counts.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use srcpref_core::chat::ChatTemplate;
use srcpref_core::conflict::{generate_dataset, read_jsonl, write_jsonl, ConflictPair, Dataset};
use srcpref_core::entity::{parse_seed_line, read_seed_entities, AttributeValue, Entity, ValueKind, PROTECTED_ATTRIBUTES};
use srcpref_core::lexicon::{Lexicon, SAMPLE_ENTITIES};
use srcpref_core::metrics::{percent_change, ChangeKind};
use srcpref_core::mitigation::{dual_kl_loss, kl, toy_gradient_check, DistillationBatch, ToyExample, ToyModel};
use srcpref_core::numeric::NumericValue;
use srcpref_core::perturb::{Alternatives, FixtureGenerator, Method, PerturbConfig};
use srcpref_core::prompt::{
    build_conflict_probe, build_prompted_preference_probe, AnswerTokens, ContextSpec, InstructionVariant, ProbeOrder,
};
use srcpref_core::rng::seeded;
use srcpref_core::sources::{SourceSpec, SourceType};
use srcpref_gateway::MockModel;
use srcpref_runner::catalog::Experiment;
use srcpref_runner::config::RunConfig;
use srcpref_runner::data::{load_inputs, Inputs};
use srcpref_runner::execute::{build_gateways, execute, Evaluation};
use srcpref_runner::export::{build_export_set, conflict_counts, ExportOptions, DEFAULT_TRAINING_ENTITIES};
use srcpref_stats::{bootstrap_test, kendall_tau, kendall_w, stv_rank, Ballot, BootstrapConfig};
use statrs::distribution::{Binomial, DiscreteCDF};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

const SEED: u64 = 2024;
const PAIRS: usize = 100;

fn mock_config(mocks: Vec<MockModel>) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.run.seed = SEED;
    cfg.run.sample = Some(PAIRS);
    cfg.mocks = mocks;
    cfg
}

fn run_mock(cfg: &RunConfig, inputs: &Inputs, experiment: Experiment) -> Result<Evaluation, String> {
    let gateways = ok(build_gateways(cfg, None))?;
    ok(execute(cfg, inputs, experiment, &gateways))
}

fn criterion_1() -> Check {
    let retention = ok(percent_change(29.4, 26.1, ChangeKind::Retention))?;
    let reduction = ok(percent_change(30.8, 4.0, ChangeKind::Reduction))?;
    ensure!((retention - 88.8).abs() <= 0.05, "retention {retention}");
    ensure!((reduction - 86.9).abs() <= 0.2, "reduction {reduction}");
    Ok(format!("retention {retention:.3}%, reduction {reduction:.3}%"))
}

fn criterion_2() -> Check {
    let cfg = mock_config(vec![MockModel::uniform()]);
    let inputs = ok(load_inputs(&cfg))?;
    ensure!(inputs.pairs.len() == PAIRS, "{} pairs", inputs.pairs.len());
    let eval = run_mock(&cfg, &inputs, Experiment::InterType)?;
    let rows: Vec<_> = eval.rows().collect();
    ensure!(rows.len() == 6, "{} matchups", rows.len());
    for r in &rows {
        ensure!(r.sp_hat.abs() < 1e-9, "{} vs {}: {}", r.x, r.y, r.sp_hat);
        ensure!(r.n == PAIRS && r.excluded == 0, "{} vs {}: n={} excluded={}", r.x, r.y, r.n, r.excluded);
    }
    Ok(format!("{} matchups, max |SP| = 0", rows.len()))
}

fn criterion_3() -> Check {
    let mut detail = Vec::new();
    for beta in [0.1, 0.4, 0.8] {
        let cfg = mock_config(vec![ok(MockModel::position_biased(beta))?]);
        let inputs = ok(load_inputs(&cfg))?;
        let eval = run_mock(&cfg, &inputs, Experiment::InterType)?;
        for p in &eval.reports.per_pair {
            ensure!(p.sp_pp == Some(0.0), "beta {beta}: pair {} has SP {:?}", p.pair_id, p.sp_pp);
        }
        let bias = eval.position_bias.first().ok_or("no position-bias row")?.position_bias;
        ensure!((bias - beta / 2.0).abs() <= 1e-9, "beta {beta}: position bias {bias}");
        detail.push(format!("beta {beta}: bias {bias:.6}"));
    }
    Ok(detail.join("; "))
}

/// Builtin lexicon whose government sources all carry the affinity keyword.
fn civil_registry_inputs(cfg: &RunConfig) -> Result<Inputs, String> {
    let mut inputs = ok(load_inputs(cfg))?;
    for templates in inputs.lexicon.government_templates.values_mut() {
        *templates = vec!["Civil Registry of {LOC}".to_string()];
    }
    Ok(inputs)
}

fn criterion_4() -> Check {
    let cfg = mock_config(vec![ok(MockModel::source_affinity("Civil Registry", 0.3))?]);
    let inputs = civil_registry_inputs(&cfg)?;
    let eval = run_mock(&cfg, &inputs, Experiment::InterType)?;
    let gov: Vec<_> = eval.rows().filter(|r| r.x == "government").collect();
    ensure!(gov.len() == 3, "{} government matchups", gov.len());
    for r in &gov {
        ensure!((r.sp_hat - 30.0).abs() <= 1e-6, "government vs {}: {}", r.y, r.sp_hat);
    }
    let h = eval.reports.hierarchy.get("default/AB").ok_or("no hierarchy")?;
    ensure!(h.order.first().map(String::as_str) == Some("government"), "hierarchy {:?}", h.order);
    Ok(format!("government +30 pp vs {} types; hierarchy {:?}", gov.len(), h.order))
}

fn criterion_5() -> Check {
    let cfg = mock_config(vec![ok(MockModel::table_majority(0.2))?]);
    let inputs = ok(load_inputs(&cfg))?;
    let eval = run_mock(&cfg, &inputs, Experiment::MajorityRepetition)?;
    let gap = |layout: &str| {
        eval.reports
            .gaps
            .iter()
            .find(|g| g.panel == "majority" && g.layout == layout)
            .map(|g| g.sp_gap)
            .ok_or(format!("no {layout} gap"))
    };
    let (rep, two, one) = (gap("repetition")?, gap("majority_2table")?, gap("majority_1table")?);
    ensure!((rep - 20.0).abs() <= 1e-6, "repetition gap {rep}");
    ensure!((two - 20.0).abs() <= 1e-6, "2-table gap {two}");
    ensure!(one.abs() <= 1e-6, "1-table gap {one}");
    Ok(format!("gaps: repetition {rep:.6}, 2-table {two:.6}, 1-table {one:.6}"))
}

// Independent rank and concordance oracles.

fn oracle_midranks(s: &[f64]) -> Vec<f64> {
    s.iter()
        .map(|v| {
            let below = s.iter().filter(|w| *w < v).count() as f64;
            let equal = s.iter().filter(|w| *w == v).count() as f64;
            1.0 + below + (equal - 1.0) / 2.0
        })
        .collect()
}

fn oracle_w(rows: &[Vec<f64>]) -> Option<f64> {
    let m = rows.len() as f64;
    let n = rows[0].len();
    let mut sums = vec![0.0; n];
    let mut ties = 0.0;
    for r in rows {
        for (s, v) in sums.iter_mut().zip(oracle_midranks(r)) {
            *s += v;
        }
        let mut seen = BTreeSet::new();
        for v in r {
            if seen.insert(v.to_bits()) {
                let t = r.iter().filter(|w| *w == v).count() as f64;
                ties += t * t * t - t;
            }
        }
    }
    let mean = m * (n as f64 + 1.0) / 2.0;
    let s: f64 = sums.iter().map(|r| (r - mean).powi(2)).sum();
    let nf = n as f64;
    let denom = m * m * (nf * nf * nf - nf) - m * ties;
    (denom > 0.0).then(|| 12.0 * s / denom)
}

fn oracle_tau_b(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mut c, mut d, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let dx = (x[i] - x[j]).signum() as i64 * i64::from(x[i] != x[j]);
            let dy = (y[i] - y[j]).signum() as i64 * i64::from(y[i] != y[j]);
            match (dx, dy) {
                (0, 0) => {}
                (0, _) => tx += 1,
                (_, 0) => ty += 1,
                _ if dx == dy => c += 1,
                _ => d += 1,
            }
        }
    }
    let denom = (((c + d + tx) * (c + d + ty)) as f64).sqrt();
    (denom > 0.0).then(|| (c - d) as f64 / denom)
}

/// Repeated single-winner instant runoff with a Droop quota over strict
/// ballots given as candidate indices.
fn oracle_stv(ballots: &[Vec<usize>], names: &[&str]) -> Vec<String> {
    let quota = (ballots.len() / 2 + 1) as f64;
    let first = |active: &[usize]| -> Vec<f64> {
        let mut c = vec![0.0; names.len()];
        for b in ballots {
            if let Some(top) = b.iter().find(|x| active.contains(x)) {
                c[*top] += 1.0;
            }
        }
        c
    };
    let all: Vec<usize> = (0..names.len()).collect();
    let original = first(&all);
    let mut remaining = all;
    let mut out = Vec::new();
    while !remaining.is_empty() {
        let mut active = remaining.clone();
        let winner = loop {
            if active.len() == 1 {
                break active[0];
            }
            let c = first(&active);
            let mut electable: Vec<usize> = active.iter().copied().filter(|&i| c[i] >= quota).collect();
            // Highest count, then the earliest name.
            electable.sort_by(|&a, &b| c[b].total_cmp(&c[a]).then(names[a].cmp(names[b])));
            if let Some(&w) = electable.first() {
                break w;
            }
            // Lowest count, then fewer original first preferences, then the latest name.
            let mut order = active.clone();
            order.sort_by(|&a, &b| {
                c[a].total_cmp(&c[b]).then(original[a].total_cmp(&original[b])).then(names[b].cmp(names[a]))
            });
            active.retain(|&i| i != order[0]);
        };
        remaining.retain(|&i| i != winner);
        out.push(names[winner].to_string());
    }
    out
}

fn multisets(k: usize, items: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    for i in start..items {
        cur.push(i);
        multisets(k, items, i, cur, out);
        cur.pop();
    }
}

fn binomial_99(n: u64, p: f64) -> Result<(u64, u64), String> {
    let b = ok(Binomial::new(p, n))?;
    let lo = (0..=n).find(|&k| b.cdf(k) > 0.005).unwrap_or(0);
    let hi = (0..=n).find(|&k| b.cdf(k) >= 0.995).unwrap_or(n);
    Ok((lo, hi))
}

fn criterion_6() -> Check {
    // Kendall's W over every 3-judge, 3-item table of scores in {0, 1, 2}.
    let mut tables = 0;
    let scores: Vec<Vec<f64>> = (0..27).map(|i| vec![(i % 3) as f64, (i / 3 % 3) as f64, (i / 9) as f64]).collect();
    for a in &scores {
        for b in &scores {
            for c in &scores {
                let rows = vec![a.clone(), b.clone(), c.clone()];
                match (oracle_w(&rows), kendall_w(&rows)) {
                    (Some(e), Ok(g)) => ensure!(e == g, "W {rows:?}: {g} vs {e}"),
                    (None, Err(_)) => {}
                    (e, g) => return Err(format!("W {rows:?}: {g:?} vs {e:?}")),
                }
                tables += 1;
            }
        }
    }

    let mut rng = seeded(SEED);
    for _ in 0..1000 {
        let x: Vec<f64> = (0..8).map(|_| rng.random_range(0..5) as f64).collect();
        let y: Vec<f64> = (0..8).map(|_| rng.random_range(0..5) as f64).collect();
        match (oracle_tau_b(&x, &y), kendall_tau(&x, &y)) {
            (Some(e), Ok(g)) => ensure!((e - g).abs() < 1e-12, "tau {x:?} {y:?}: {g} vs {e}"),
            (None, Err(_)) => {}
            (e, g) => return Err(format!("tau {x:?} {y:?}: {g:?} vs {e:?}")),
        }
    }

    let names = ["a", "b", "c"];
    let perms: Vec<Vec<usize>> =
        vec![vec![0, 1, 2], vec![0, 2, 1], vec![1, 0, 2], vec![1, 2, 0], vec![2, 0, 1], vec![2, 1, 0]];
    let mut sets = Vec::new();
    multisets(5, perms.len(), 0, &mut Vec::new(), &mut sets);
    ensure!(sets.len() == 252, "{} multisets", sets.len());
    for set in &sets {
        let ballots: Vec<Vec<usize>> = set.iter().map(|&i| perms[i].clone()).collect();
        let stv: Vec<Ballot> = ballots
            .iter()
            .enumerate()
            .map(|(k, b)| Ballot::strict(format!("v{k}"), &b.iter().map(|&i| names[i]).collect::<Vec<_>>()))
            .collect();
        let got = ok(stv_rank(&stv))?;
        let expected = oracle_stv(&ballots, &names);
        ensure!(got == expected, "STV {ballots:?}: {got:?} vs {expected:?}");
    }

    let normal = ok(Normal::new(0.0, 1.0))?;
    let sims = 200u64;
    let mut rejected = 0u64;
    for s in 0..sims {
        let values: Vec<f64> = (0..50).map(|_| normal.sample(&mut rng)).collect();
        let t = ok(bootstrap_test(&values, &BootstrapConfig { resamples: 2000, seed: s, confidence: 0.95 }))?;
        rejected += u64::from(t.p_value < 0.05);
    }
    let (lo, hi) = binomial_99(sims, 0.05)?;
    ensure!((lo..=hi).contains(&rejected), "{rejected}/{sims} null rejections outside [{lo}, {hi}]");
    Ok(format!(
        "W {tables} tables exact; tau 1000 vectors; STV {} multisets; bootstrap {rejected}/{sims} rejections in [{lo}, {hi}]",
        sets.len()
    ))
}

fn oracle_kl(p: [f64; 2], q: [f64; 2]) -> f64 {
    (0..2).filter(|&i| p[i] > 0.0).map(|i| p[i] * (p[i].ln() - q[i].ln())).sum()
}

fn criterion_7() -> Check {
    let mut rng = seeded(SEED);
    let dist = |rng: &mut rand_chacha::ChaCha8Rng| {
        let a: f64 = rng.random_range(0.01..0.99);
        [a, 1.0 - a]
    };
    let mut worst_loss: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..10);
        let lambda: f64 = rng.random_range(0.0..=1.0);
        let t: Vec<[f64; 2]> = (0..n).map(|_| dist(&mut rng)).collect();
        let u: Vec<[f64; 2]> = (0..n).map(|_| dist(&mut rng)).collect();
        let r: Vec<[f64; 2]> = (0..n).map(|_| dist(&mut rng)).collect();
        let expected = (0..n)
            .map(|i| lambda * oracle_kl(t[i], u[i]) + (1.0 - lambda) * oracle_kl(t[i], r[i]))
            .sum::<f64>()
            / n as f64;
        let got = ok(dual_kl_loss(&DistillationBatch { teacher_u: t, student_u: u, student_r: r, lambda }))?;
        worst_loss = worst_loss.max((got - expected).abs());
    }
    ensure!(worst_loss < 1e-12, "loss deviates by {worst_loss}");

    let mut worst_grad: f64 = 0.0;
    for _ in 0..50 {
        let dim = 4;
        let model = ToyModel { weights: (0..2 * dim).map(|_| rng.random_range(-1.0..1.0)).collect(), dim };
        let ex: Vec<ToyExample> = (0..4)
            .map(|_| ToyExample {
                teacher: dist(&mut rng),
                phi_u: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
                phi_r: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            })
            .collect();
        worst_grad = worst_grad.max(ok(toy_gradient_check(&model, &ex, 0.75, 1e-6))?);
    }
    ensure!(worst_grad < 1e-4, "gradient relative error {worst_grad}");

    let t = [0.7, 0.3];
    let (u, r1, r2) = ([0.6, 0.4], [0.5, 0.5], [0.1, 0.9]);
    let loss = |lambda, u, r| dual_kl_loss(&DistillationBatch { teacher_u: vec![t], student_u: vec![u], student_r: vec![r], lambda });
    ensure!(ok(loss(1.0, u, r1))? == ok(loss(1.0, u, r2))?, "lambda = 1 depends on the repeated branch");
    ensure!(ok(loss(1.0, u, r1))? == kl(&t, &u), "lambda = 1 is not KL(teacher, unrepeated)");
    ensure!(ok(loss(0.0, u, r1))? == ok(loss(0.0, [0.2, 0.8], r1))?, "lambda = 0 depends on the unrepeated branch");
    ensure!(ok(loss(0.0, u, r1))? == kl(&t, &r1), "lambda = 0 is not KL(teacher, repeated)");
    Ok(format!("loss max error {worst_loss:.1e}; gradient max relative error {worst_grad:.1e}; limits exact"))
}

fn sample_dataset(seed: u64) -> Result<(Lexicon, Dataset), String> {
    let lx = Lexicon::builtin();
    let es = ok(read_seed_entities(SAMPLE_ENTITIES.as_bytes(), &lx.attributes))?;
    let g = FixtureGenerator::builtin();
    let ds = ok(generate_dataset(&es, &lx, Some(&g), PerturbConfig { seed, alternatives: 4 }))?;
    Ok((lx, ds))
}

fn within_bounds(lx: &Lexicon, alt: &Alternatives, raw: &str) -> Result<(), String> {
    let orig = alt.original.raw();
    ensure!(!raw.eq_ignore_ascii_case(orig), "{}/{} kept {raw}", alt.entity_id, alt.attribute);
    ensure!(!lx.denylist.contains(raw), "denylisted {raw}");
    match alt.method {
        Method::Numeric => {
            let o = NumericValue::parse(orig).ok_or(format!("unparsable {orig}"))?;
            let n = NumericValue::parse(raw).ok_or(format!("unparsable {raw}"))?;
            ensure!(n.value >= 0.8 * o.value - 1e-9 && n.value <= 1.2 * o.value + 1e-9, "{raw} vs {orig}");
            ensure!(n.prefix == o.prefix && n.suffix == o.suffix, "{raw} vs {orig} units");
        }
        Method::Year => {
            let o: i32 = ok(orig.parse())?;
            let n: i32 = ok(raw.parse())?;
            ensure!((o - n).abs() <= 30 && (1850..=2025).contains(&n), "{raw} vs {orig}");
        }
        Method::ExactDate => {
            let o = ok(NaiveDate::parse_from_str(orig, "%Y-%m-%d"))?;
            let n = ok(NaiveDate::parse_from_str(raw, "%Y-%m-%d"))?;
            ensure!((n - o).num_days().abs() <= 365, "{raw} vs {orig}");
        }
        Method::Curated => {
            let set = lx.attributes.curated.values(&alt.attribute).ok_or("no curated set")?;
            ensure!(set.iter().any(|s| s.eq_ignore_ascii_case(raw)), "{raw} not curated");
        }
        Method::Generated => {}
    }
    Ok(())
}

fn criterion_8() -> Check {
    let (lx, ds) = sample_dataset(SEED)?;
    ensure!(!ds.pairs.is_empty(), "no pairs");
    for p in &ds.pairs {
        let differing: Vec<&String> = p
            .base
            .attributes()
            .iter()
            .chain(p.variant.attributes())
            .map(|a| &a.name)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .filter(|a| p.base.get(a) != p.variant.get(a))
            .collect();
        ensure!(differing == [&p.conflict_attribute], "{}: differs in {differing:?}", p.id);
        for a in PROTECTED_ATTRIBUTES {
            ensure!(p.base.get(a) == p.variant.get(a), "{}: {a} perturbed", p.id);
        }
    }
    let mut checked = 0;
    for alt in &ds.alternatives {
        ensure!(!PROTECTED_ATTRIBUTES.contains(&alt.attribute.as_str()), "{} targeted", alt.attribute);
        let distinct: BTreeSet<&str> = alt.values.iter().map(|v| v.raw()).collect();
        ensure!(distinct.len() == alt.values.len(), "duplicate alternatives for {}/{}", alt.entity_id, alt.attribute);
        for v in &alt.values {
            within_bounds(&lx, alt, v.raw())?;
            checked += 1;
        }
    }
    let dump = |ds: &Dataset| -> Result<Vec<u8>, String> {
        let mut buf = Vec::new();
        ok(write_jsonl(&ds.pairs, &mut buf))?;
        ok(write_jsonl(&ds.alternatives, &mut buf))?;
        Ok(buf)
    };
    ensure!(dump(&ds)? == dump(&sample_dataset(SEED)?.1)?, "regeneration differs");
    Ok(format!("{} pairs, {checked} alternatives within bounds, regeneration identical", ds.pairs.len()))
}

const GOV_VS_NONE: &str = include_str!("../../core/tests/fixtures/gov_vs_none.txt");
const PROMPTED: &str = include_str!("../../core/tests/fixtures/prompted.txt");
const MAJORITY_1TABLE: &str = include_str!("../../core/tests/fixtures/majority_1table.txt");
const MAJORITY_2TABLE: &str = include_str!("../../core/tests/fixtures/majority_2table.txt");
const REPETITION: &str = include_str!("../../core/tests/fixtures/repetition.txt");

fn segments(chatml: &str) -> Result<(String, String), String> {
    let body = chatml.strip_prefix("<|im_start|>system\n").ok_or("no system turn")?;
    let (system, rest) = body.split_once("<|im_end|>\n<|im_start|>user\n").ok_or("no user turn")?;
    let user = rest.trim_end_matches("<|im_start|>assistant\n").trim_end_matches('\n').trim_end_matches("<|im_end|>");
    Ok((system.to_string(), user.to_string()))
}

fn criterion_9() -> Check {
    let lx = Lexicon::builtin();
    let first = SAMPLE_ENTITIES.lines().next().ok_or("no sample entity")?;
    let sarah: Entity = ok(parse_seed_line(first, &lx.attributes))?;
    let v = ok(AttributeValue::new(ValueKind::ExactDate, "1987-08-14"))?;
    let pair = ok(ConflictPair::from_replacement("person-001/date_of_birth/0", &sarah, "date_of_birth", v))?;
    let gov = |s: &str| SourceSpec::verbatim(SourceType::Government, s);
    let social = |h: &str, f: &str| SourceSpec::verbatim(SourceType::SocialMedia, format!("{h} ({f} followers)"));
    let probe = |ctx: &ContextSpec, arrangement| {
        ok(build_conflict_probe(
            &pair,
            ctx,
            &lx.questions,
            InstructionVariant::Default,
            ProbeOrder { arrangement, options_flipped: false },
            AnswerTokens::AB,
        ))
    };
    let chatml = ChatTemplate::ChatMl;

    let attributed = probe(&ContextSpec::pair(&pair, Some(&gov("Civil Registry of Silverbine Heights")), Some(&SourceSpec::none())), 0)?;
    ensure!(chatml.render(&attributed.messages) == GOV_VS_NONE, "government vs none prompt differs");

    let prompted = build_prompted_preference_probe(
        "gov-vs-news",
        &gov("User District Administration of Birchwalk"),
        &SourceSpec::verbatim(SourceType::Newspaper, "Arvenholm Examiner"),
        "Who would you consider a more credible informant?",
        false,
        AnswerTokens::AB,
    );
    ensure!(chatml.render(&prompted.messages) == PROMPTED, "prompted-preference prompt differs");

    let registry = gov("Civil Registry Of Silverbine Heights");
    let one_table_ctx = ok(ContextSpec::majority_1table(
        &pair,
        &social("@AthleticStub3286", "94"),
        &social("@FranticLife9935", "7912"),
        &registry,
    ))?;
    let one_table = probe(&one_table_ctx, 1)?;
    let (sys, user) = segments(MAJORITY_1TABLE)?;
    ensure!(one_table.system() == sys && one_table.user() == user, "1-table majority prompt differs");

    let two_table_ctx = ok(ContextSpec::majority_2table(
        &pair,
        &social("@AthleticRecess3286", "94"),
        &social("@FranticDriveller9935", "7912"),
        &registry,
    ))?;
    let two_table = probe(&two_table_ctx, 2)?;
    let (sys, user) = segments(MAJORITY_2TABLE)?;
    ensure!(two_table.system() == sys && two_table.user() == user, "2-table majority prompt differs");

    let repeated_ctx = ok(ContextSpec::repetition(&pair, Some(&social("@AthleticEvaporite3286", "94")), Some(&registry)))?;
    let repeated = probe(&repeated_ctx, 2)?;
    ensure!(chatml.render(&repeated.messages) == REPETITION, "repetition prompt differs");
    Ok("5 prompt bodies identical".into())
}

fn criterion_10() -> Check {
    let mut cfg = RunConfig::default();
    cfg.run.seed = SEED;
    let inputs = ok(load_inputs(&cfg))?;
    let set = ok(build_export_set(&inputs, &ExportOptions::new(SEED)))?;

    // Every vocabulary component of every emitted source, by side.
    let mut train: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    let mut test: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    let mut sources = 0;
    let mut collect = |side: &mut BTreeMap<&str, BTreeSet<String>>, s: &SourceSpec| {
        sources += 1;
        let p = &s.provenance;
        let parts: [(&str, &Option<String>); 5] = match s.source_type {
            SourceType::Government => [("template", &p.template), ("location", &p.location), ("", &None), ("", &None), ("", &None)],
            SourceType::SocialMedia => [("", &None), ("", &None), ("adjective", &p.adjective), ("noun", &p.noun), ("digits", &p.digits)],
            _ => return,
        };
        for (kind, v) in parts {
            if let Some(v) = v {
                side.entry(kind).or_default().insert(v.clone());
            }
        }
        if s.source_type == SourceType::SocialMedia {
            side.entry("handle").or_default().insert(s.name.clone());
        }
    };
    for p in set.train.iter().chain(&set.validation) {
        collect(&mut train, &p.x);
        collect(&mut train, &p.y);
    }
    for p in &set.test {
        collect(&mut test, &p.x);
        collect(&mut test, &p.y);
    }
    for (kind, values) in &test {
        if let Some(t) = train.get(kind) {
            let shared: Vec<&String> = values.intersection(t).collect();
            ensure!(shared.is_empty(), "{kind} shared across splits: {shared:?}");
        }
    }
    ensure!(test.contains_key("template") && test.contains_key("handle"), "test side lacks government or social sources");
    let mut detail = format!(
        "{} train / {} validation / {} test pairs, {sources} sources, zero overlap",
        set.train.len(),
        set.validation.len(),
        set.test.len()
    );

    match std::env::var_os("SRCPREF_RELEASED_DIR") {
        Some(dir) => {
            let dir = PathBuf::from(dir);
            let lx = Lexicon::builtin();
            let text = ok(std::fs::read(dir.join("entities.jsonl")))?;
            let entities = ok(read_seed_entities(text.as_slice(), &lx.attributes))?;
            let alts: Vec<Alternatives> = ok(read_jsonl(std::io::BufReader::new(ok(std::fs::File::open(dir.join("alternatives.jsonl")))?)))?;
            let c = ok(conflict_counts(&entities, &alts, DEFAULT_TRAINING_ENTITIES))?;
            ensure!(c.training_base == 217, "released base-vs-variant training conflicts {}", c.training_base);
            ensure!(c.training_total == 478, "released training conflicts {}", c.training_total);
            ensure!(c.test == 7223, "released test pairs {}", c.test);
            detail.push_str("; released counts 217 -> 478, 7223 match");
        }
        None => detail.push_str("; released counts skipped (SRCPREF_RELEASED_DIR unset)"),
    }
    Ok(detail)
}

fn main() {
    let criteria: [(&str, fn() -> Check, Duration); 10] = [
        ("1 metric arithmetic", criterion_1, Duration::from_secs(1)),
        ("2 uniform-mock null", criterion_2, Duration::from_secs(30)),
        ("3 position-bias cancellation", criterion_3, Duration::from_secs(60)),
        ("4 source-affinity end to end", criterion_4, Duration::from_secs(60)),
        ("5 repetition disentanglement", criterion_5, Duration::from_secs(120)),
        ("6 statistics oracles", criterion_6, Duration::from_secs(300)),
        ("7 distillation objective", criterion_7, Duration::from_secs(60)),
        ("8 data-generation invariants", criterion_8, Duration::from_secs(60)),
        ("9 prompt golden files", criterion_9, Duration::from_secs(5)),
        ("10 split hygiene", criterion_10, Duration::from_secs(600)),
    ];
    let mut failed = 0;
    for (name, f, budget) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(d) if elapsed > budget => Err(format!("{d}; took {elapsed:.2?}, budget {budget:?}")),
            o => o,
        };
        match outcome {
            Ok(d) => println!("PASS criterion {name} ({elapsed:.2?}): {d}"),
            Err(e) => {
                failed += 1;
                println!("FAIL criterion {name} ({elapsed:.2?}): {e}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
