//! Run manifest: a hash over everything that determines the artifacts —
//! input contents, seed, evaluator settings, prompt templates, trial count,
//! similarity threshold and audit mode. Analysis-only settings (tau, fit
//! bounds, report zones) are deliberately left out so they can be varied
//! over the same run.
//!
//! Every artifact carries the hash, and commands refuse to combine
//! artifacts whose hash differs from the current manifest unless forced.

use std::path::Path;

use serde::{Deserialize, Serialize};

use mumkit_core::hashing::sha256_hex;
use mumkit_core::runner::read_manifest_comment;
use mumkit_core::EvaluatorConfig;

use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_FORMAT: &str = "mumkit-manifest/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatorEntry {
    pub config: EvaluatorConfig,
    pub prompts_hash: String,
    /// Mock evaluators only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triggers_version: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub hash: String,
    pub tool_version: String,
    pub corpus_version: String,
    pub lexicon_version: String,
    pub seed: u64,
    pub similarity_threshold: f64,
    pub audit_drop: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audit_hash: Option<String>,
    pub degraded_fraction: f64,
    pub rankings_evaluator: String,
    pub evaluators: Vec<EvaluatorEntry>,
    /// Canonical JSON of the population and sweep settings, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population: Option<String>,
}

impl Manifest {
    /// Fills `hash` from every other field.
    pub fn seal(mut self) -> Self {
        self.hash = String::new();
        let body = serde_json::to_vec(&self).expect("manifest serializes");
        self.hash = sha256_hex(body)[..16].to_string();
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }

    pub fn load(out_dir: &Path) -> Result<Option<Self>, CliError> {
        let path = out_dir.join(MANIFEST_FILE);
        match std::fs::read_to_string(&path) {
            Ok(src) => serde_json::from_str(&src)
                .map(Some)
                .map_err(|e| CliError::usage(format!("{}: {e}", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(CliError::usage(format!("{}: {e}", path.display()))),
        }
    }

    pub fn evaluator(&self, id: &str) -> Option<&EvaluatorEntry> {
        self.evaluators.iter().find(|e| e.config.id == id)
    }
}

/// Compares an artifact's embedded hash with the current one.
pub fn check_hash(what: &Path, found: Option<&str>, expected: &str, force: bool) -> Result<(), CliError> {
    match found {
        Some(h) if h == expected => Ok(()),
        other => {
            let msg = format!(
                "{} was produced under manifest {} but the current manifest is {expected}",
                what.display(),
                other.unwrap_or("<none>")
            );
            if force {
                log::warn!("{msg} (continuing because of --force)");
                Ok(())
            } else {
                Err(CliError::invariant(format!("{msg}; rebuild or pass --force")))
            }
        }
    }
}

/// Checks the `# manifest:` first line of a text artifact.
pub fn check_artifact(path: &Path, src: &str, expected: &str, force: bool) -> Result<(), CliError> {
    check_hash(path, read_manifest_comment(src), expected, force)
}
