//! Loading or generating the conflict-pair dataset.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;

use srcpref_core::conflict::{generate_dataset, read_jsonl, ConflictPair, Dataset, DatasetManifest};
use srcpref_core::entity::{read_seed_entities, Entity};
use srcpref_core::lexicon::{Lexicon, SAMPLE_ENTITIES, SAMPLE_GENERATIONS};
use srcpref_core::perturb::{Alternatives, FixtureGenerator, PerturbConfig};
use srcpref_core::rng::{derive_seed, digest_hex};

use crate::config::RunConfig;
use crate::error::Result;

/// Everything an experiment draws on.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub lexicon: Lexicon,
    pub entities: Vec<Entity>,
    pub alternatives: Vec<Alternatives>,
    pub pairs: Vec<ConflictPair>,
    /// Input name → hex SHA-256.
    pub digests: BTreeMap<String, String>,
    pub dataset_manifest: Option<DatasetManifest>,
}

pub fn load_lexicon(cfg: &RunConfig) -> Result<Lexicon> {
    Ok(match &cfg.data.lexicon_dir {
        Some(dir) => Lexicon::load_dir(dir)?,
        None => Lexicon::builtin(),
    })
}

fn read_text(path: Option<&std::path::Path>, builtin: &str, name: &str, digests: &mut BTreeMap<String, String>) -> Result<String> {
    let text = match path {
        Some(p) => fs::read_to_string(p)?,
        None => builtin.to_string(),
    };
    digests.insert(name.to_string(), digest_hex(text.as_bytes()));
    Ok(text)
}

/// Perturbs the configured seed entities into a dataset.
pub fn generate(cfg: &RunConfig, lexicon: &Lexicon) -> Result<(Vec<Entity>, Dataset, DatasetManifest)> {
    let mut digests = BTreeMap::new();
    let entities_text = read_text(cfg.data.entities.as_deref(), SAMPLE_ENTITIES, "entities", &mut digests)?;
    let generations = read_text(cfg.data.generations.as_deref(), SAMPLE_GENERATIONS, "generations", &mut digests)?;
    let entities = read_seed_entities(entities_text.as_bytes(), &lexicon.attributes)?;
    let generator = FixtureGenerator::parse_jsonl(&generations).map_err(srcpref_core::error::DataError::from)?;
    let pc = PerturbConfig { seed: cfg.run.seed, alternatives: cfg.data.alternatives };
    let dataset = generate_dataset(&entities, lexicon, Some(&generator), pc)?;
    let manifest = DatasetManifest::new(&dataset, entities.len(), pc, digests);
    Ok((entities, dataset, manifest))
}

pub fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    let lexicon = load_lexicon(cfg)?;
    let (entities, dataset, manifest) = generate(cfg, &lexicon)?;
    let mut digests = manifest.input_digests.clone();
    let pairs = match &cfg.data.pairs {
        Some(p) => {
            let text = fs::read(p)?;
            digests.insert("pairs".into(), digest_hex(&text));
            read_jsonl(BufReader::new(text.as_slice()))?
        }
        None => dataset.pairs,
    };
    let pairs = match cfg.run.sample {
        Some(n) => sample_pairs(&pairs, n, cfg.run.seed),
        None => pairs,
    };
    Ok(Inputs { lexicon, entities, alternatives: dataset.alternatives, pairs, digests, dataset_manifest: Some(manifest) })
}

/// Keeps the `n` pairs with the smallest seeded hash of their id, in their
/// original order.
pub fn sample_pairs(pairs: &[ConflictPair], n: usize, seed: u64) -> Vec<ConflictPair> {
    if n >= pairs.len() {
        return pairs.to_vec();
    }
    let mut keyed: Vec<(u64, usize)> =
        pairs.iter().enumerate().map(|(i, p)| (derive_seed(seed, &format!("sample/{}", p.id)), i)).collect();
    keyed.sort();
    let mut keep: Vec<usize> = keyed.into_iter().take(n).map(|(_, i)| i).collect();
    keep.sort();
    keep.into_iter().map(|i| pairs[i].clone()).collect()
}
