//! Content-addressed response cache.
//!
//! Layout: `<dir>/<first two hex chars>/<key>.json`, each file holding
//! `{"response": "..."}`. Writes go to a temporary sibling and are renamed
//! into place, so concurrent readers never observe a partial entry.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashing::FieldHasher;

#[derive(Serialize, Deserialize)]
struct Entry {
    response: String,
}

#[derive(Debug, Default)]
pub struct ResponseCache {
    dir: Option<PathBuf>,
    mem: RwLock<HashMap<String, String>>,
}

pub fn cache_key(
    evaluator_id: &str,
    fingerprint: &str,
    prompt: &str,
    temperature: f64,
    trial_index: u8,
    attempt: u8,
) -> String {
    let mut h = FieldHasher::new("response-cache-v1");
    h.field(evaluator_id)
        .field(fingerprint)
        .field(prompt)
        .num(temperature.to_bits())
        .num(trial_index as u64)
        .num(attempt as u64);
    h.hex()
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn on_disk(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self {
            dir: Some(dir),
            mem: RwLock::default(),
        })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn path_for(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(&key[..2]).join(format!("{key}.json")))
    }

    pub fn get(&self, key: &str) -> Option<String> {
        if let Some(v) = self.mem.read().unwrap().get(key) {
            return Some(v.clone());
        }
        let path = self.path_for(key)?;
        let bytes = std::fs::read(&path).ok()?;
        let entry: Entry = serde_json::from_slice(&bytes).ok()?;
        self.mem
            .write()
            .unwrap()
            .insert(key.to_string(), entry.response.clone());
        Some(entry.response)
    }

    pub fn put(&self, key: &str, response: &str) -> Result<()> {
        self.mem
            .write()
            .unwrap()
            .insert(key.to_string(), response.to_string());
        let Some(path) = self.path_for(key) else {
            return Ok(());
        };
        let parent = path.parent().expect("cache entry has a parent");
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        let tmp = parent.join(format!(
            ".{key}.{}.{:?}.tmp",
            std::process::id(),
            std::thread::current().id()
        ));
        let body = serde_json::to_vec(&Entry {
            response: response.to_string(),
        })
        .expect("entry serializes");
        std::fs::write(&tmp, body).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.mem.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_round_trip_survives_new_instance() {
        let dir = tempfile::tempdir().unwrap();
        let key = cache_key("m", "fp", "prompt", 0.0, 1, 0);
        {
            let c = ResponseCache::on_disk(dir.path()).unwrap();
            assert!(c.get(&key).is_none());
            c.put(&key, "yes").unwrap();
        }
        let c = ResponseCache::on_disk(dir.path()).unwrap();
        assert_eq!(c.get(&key).as_deref(), Some("yes"));
    }

    #[test]
    fn key_depends_on_every_field() {
        let base = cache_key("m", "fp", "p", 0.0, 0, 0);
        assert_ne!(base, cache_key("n", "fp", "p", 0.0, 0, 0));
        assert_ne!(base, cache_key("m", "fq", "p", 0.0, 0, 0));
        assert_ne!(base, cache_key("m", "fp", "q", 0.0, 0, 0));
        assert_ne!(base, cache_key("m", "fp", "p", 0.1, 0, 0));
        assert_ne!(base, cache_key("m", "fp", "p", 0.0, 1, 0));
        assert_ne!(base, cache_key("m", "fp", "p", 0.0, 0, 1));
    }
}
