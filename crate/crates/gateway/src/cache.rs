//! Content-addressed store of answer-token probabilities.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use sha2::{Digest, Sha256};

use crate::error::Result;

/// `sha256(model_id ‖ 0 ‖ prompt ‖ 0 ‖ tokens joined by 0x1f)`.
pub fn cache_key(model_id: &str, rendered_prompt: &str, tokens: &[String]) -> String {
    let mut h = Sha256::new();
    h.update(model_id.as_bytes());
    h.update([0]);
    h.update(rendered_prompt.as_bytes());
    h.update([0]);
    h.update(tokens.join("\u{1f}").as_bytes());
    hex::encode(h.finalize())
}

/// In-memory cache, optionally backed by one JSON file per entry.
#[derive(Debug, Default)]
pub struct ProbCache {
    dir: Option<PathBuf>,
    mem: Mutex<HashMap<String, BTreeMap<String, f64>>>,
}

impl ProbCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn on_disk(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir: Some(dir), mem: Mutex::default() })
    }

    fn path(dir: &Path, key: &str) -> PathBuf {
        dir.join(&key[..2]).join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Result<Option<BTreeMap<String, f64>>> {
        if let Some(v) = self.mem.lock().expect("cache lock").get(key) {
            return Ok(Some(v.clone()));
        }
        let Some(dir) = &self.dir else { return Ok(None) };
        let path = Self::path(dir, key);
        if !path.exists() {
            return Ok(None);
        }
        let v: BTreeMap<String, f64> = serde_json::from_slice(&fs::read(path)?)?;
        self.mem.lock().expect("cache lock").insert(key.to_string(), v.clone());
        Ok(Some(v))
    }

    pub fn put(&self, key: &str, probs: &BTreeMap<String, f64>) -> Result<()> {
        if let Some(dir) = &self.dir {
            let path = Self::path(dir, key);
            fs::create_dir_all(path.parent().expect("entry has a parent"))?;
            let tmp = path.with_extension("tmp");
            fs::write(&tmp, serde_json::to_vec(probs)?)?;
            fs::rename(tmp, path)?;
        }
        self.mem.lock().expect("cache lock").insert(key.to_string(), probs.clone());
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.mem.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
