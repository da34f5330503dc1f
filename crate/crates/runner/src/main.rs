use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use srcpref_core::conflict::{write_jsonl, write_review_tsv};
use srcpref_core::entity::EntityType;
use srcpref_core::rng::substream;
use srcpref_core::sources::{SourceSampler, SourceType};
use srcpref_gateway::Gateway;
use srcpref_runner::catalog::Experiment;
use srcpref_runner::config::RunConfig;
use srcpref_runner::data::{generate, load_inputs, load_lexicon};
use srcpref_runner::execute::{build_gateways, restat, run_experiment};
use srcpref_runner::export::{build_export_set, write_export_dir, ExportOptions};

#[derive(Parser)]
#[command(name = "srcpref", version, about = "Source-preference experiments for knowledge conflicts")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Deterministic subsample of conflict pairs.
    #[arg(long, global = true)]
    sample: Option<usize>,
    /// Archive raw HTTP exchanges next to the reports.
    #[arg(long, global = true)]
    archive: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Perturb the seed entities into conflict pairs.
    GenerateData {
        #[arg(long, default_value = "data")]
        out: PathBuf,
    },
    /// Draw source instances of one type.
    GenerateSources {
        #[arg(long = "type")]
        source_type: SourceType,
        #[arg(long, default_value = "person")]
        entity_type: EntityType,
        #[arg(long, default_value_t = 20)]
        n: usize,
    },
    /// Run experiments on every configured model.
    Run {
        /// Experiments to run; all of them when omitted.
        #[arg(long = "experiment", short = 'e', value_enum)]
        experiments: Vec<Experiment>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute tests and summaries from a run directory's per-pair values.
    Stats { dir: PathBuf },
    /// Write aligned prompt pairs for repetition-invariance fine-tuning.
    ExportTrainingPairs {
        #[arg(long, default_value = "export")]
        out: PathBuf,
        /// Model whose probabilities become the frozen teacher targets.
        #[arg(long)]
        teacher: Option<String>,
        #[arg(long, default_value_t = srcpref_core::mitigation::DEFAULT_TRAINING_INPUTS)]
        target: usize,
        #[arg(long, default_value_t = srcpref_runner::export::DEFAULT_TRAINING_ENTITIES)]
        training_entities: usize,
    },
    /// Print a run directory's results with the significance summary.
    Report { dir: PathBuf },
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    if cli.sample.is_some() {
        cfg.run.sample = cli.sample;
    }
    cfg.run.archive |= cli.archive;
    cfg.validate()?;
    Ok(cfg)
}

fn report(dir: &std::path::Path) -> Result<()> {
    let mut rdr = csv::Reader::from_path(dir.join("results.csv"))
        .with_context(|| format!("reading {}", dir.join("results.csv").display()))?;
    let out = std::io::stdout();
    let mut out = out.lock();
    writeln!(out, "{:<22} {:<32} {:<32} {:<16} {:>9} {:>6} {:>9} {:>4}", "model", "x", "y", "layout", "sp_hat", "n", "p", "sig")?;
    for rec in rdr.deserialize() {
        let r: srcpref_core::results::ResultRow = rec?;
        writeln!(
            out,
            "{:<22} {:<32} {:<32} {:<16} {:>9.2} {:>6} {:>9.4} {:>4}",
            r.model,
            r.x,
            r.y,
            r.layout,
            r.sp_hat,
            r.n,
            r.p_value,
            if r.significant { "*" } else { "" }
        )?;
    }
    let summary = dir.join("summary.csv");
    if summary.exists() {
        writeln!(out)?;
        let mut rdr = csv::Reader::from_path(summary)?;
        for rec in rdr.records() {
            let rec = rec?;
            if rec.get(9) == Some("true") {
                writeln!(out, "reported: {} {} vs {} ({}), {} of {} models", &rec[0], &rec[1], &rec[2], &rec[3], &rec[7], &rec[6])?;
            }
        }
    }
    let hierarchy = dir.join("hierarchy.json");
    if hierarchy.exists() {
        let h: serde_json::Value = serde_json::from_slice(&fs::read(hierarchy)?)?;
        if let Some(map) = h.as_object() {
            for (setting, v) in map {
                writeln!(out, "hierarchy [{setting}]: {}", v["order"])?;
            }
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let cfg = load_config(&cli)?;
    match &cli.command {
        Command::GenerateData { out } => {
            let lexicon = load_lexicon(&cfg)?;
            let (_, dataset, manifest) = generate(&cfg, &lexicon)?;
            fs::create_dir_all(out)?;
            write_jsonl(&dataset.pairs, BufWriter::new(File::create(out.join("pairs.jsonl"))?))?;
            write_jsonl(&dataset.alternatives, BufWriter::new(File::create(out.join("alternatives.jsonl"))?))?;
            write_jsonl(&dataset.skipped, BufWriter::new(File::create(out.join("skipped.jsonl"))?))?;
            write_review_tsv(&dataset.alternatives, BufWriter::new(File::create(out.join("review.tsv"))?))?;
            fs::write(out.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
            log::info!("{} conflict pairs written to {}", dataset.pairs.len(), out.display());
        }
        Command::GenerateSources { source_type, entity_type, n } => {
            let lexicon = load_lexicon(&cfg)?;
            let sampler = SourceSampler::new(&lexicon);
            let mut rng = substream(cfg.run.seed, &format!("generate-sources/{source_type}/{entity_type}"));
            let out = std::io::stdout();
            let mut out = out.lock();
            for _ in 0..*n {
                let s = sampler.sample(*source_type, *entity_type, &mut rng)?;
                serde_json::to_writer(&mut out, &s)?;
                writeln!(out)?;
            }
        }
        Command::Run { experiments, out } => {
            let mut cfg = cfg.clone();
            if let Some(o) = out {
                cfg.run.output_dir = o.clone();
            }
            if cfg.mocks.is_empty() && cfg.endpoints.is_empty() {
                bail!("no models configured; add [[mocks]] or [[endpoints]] to the config");
            }
            let inputs = load_inputs(&cfg)?;
            let list = if experiments.is_empty() { Experiment::ALL.to_vec() } else { experiments.clone() };
            for e in list {
                let (dir, eval) = run_experiment(&cfg, &inputs, e)?;
                log::info!("{e}: {} result rows in {}", eval.reports.results.len(), dir.display());
            }
        }
        Command::Stats { dir } => {
            let reports = restat(dir, &cfg.stats, cfg.run.seed)?;
            log::info!("{} result rows rewritten in {}", reports.results.len(), dir.display());
        }
        Command::ExportTrainingPairs { out, teacher, target, training_entities } => {
            let inputs = load_inputs(&cfg)?;
            let opts = ExportOptions { seed: cfg.run.seed, training_entities: *training_entities, target: *target };
            let set = build_export_set(&inputs, &opts)?;
            let gateways = if teacher.is_some() { build_gateways(&cfg, None)? } else { Vec::new() };
            let teacher: Option<&Gateway> = match teacher {
                Some(id) => Some(
                    gateways
                        .iter()
                        .find(|g| g.model_id() == id)
                        .with_context(|| format!("teacher `{id}` is not a configured model"))?,
                ),
                None => None,
            };
            let summary = write_export_dir(out, &set, teacher, &opts)?;
            log::info!("export counts {:?} written to {}", summary.manifest.counts, out.display());
            if summary.without_teacher > 0 {
                log::warn!("{} training records lack teacher probabilities", summary.without_teacher);
            }
        }
        Command::Report { dir } => report(dir)?,
    }
    Ok(())
}
