use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashing::FieldHasher;

const DETECTION: &str = include_str!("../../prompts/detection.txt");
const IMPORTANCE: &str = include_str!("../../prompts/importance.txt");
const RECONSTRUCTION: &str = include_str!("../../prompts/reconstruction.txt");

/// Prompt templates with `{name}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplates {
    pub detection: String,
    pub importance: String,
    pub reconstruction: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            detection: DETECTION.to_string(),
            importance: IMPORTANCE.to_string(),
            reconstruction: RECONSTRUCTION.to_string(),
        }
    }
}

/// Optional per-evaluator template overrides.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptPaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detection: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub importance: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reconstruction: Option<String>,
}

fn read_template(base: &Path, rel: &str, required: &[&str]) -> Result<String> {
    let path = base.join(rel);
    let body = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    for name in required {
        if !body.contains(&format!("{{{name}}}")) {
            return Err(Error::invalid(format!(
                "template {} lacks placeholder {{{name}}}",
                path.display()
            )));
        }
    }
    Ok(body)
}

impl PromptTemplates {
    pub fn load(base: &Path, paths: &PromptPaths) -> Result<Self> {
        let mut t = Self::default();
        if let Some(p) = &paths.detection {
            t.detection = read_template(base, p, &["text"])?;
        }
        if let Some(p) = &paths.importance {
            t.importance = read_template(base, p, &["text"])?;
        }
        if let Some(p) = &paths.reconstruction {
            t.reconstruction = read_template(base, p, &["text", "replacements"])?;
        }
        Ok(t)
    }

    pub fn hash(&self) -> String {
        let mut h = FieldHasher::new("prompts");
        h.field(&self.detection)
            .field(&self.importance)
            .field(&self.reconstruction);
        h.short()
    }
}

/// Substitutes `{name}` placeholders. Unknown placeholders are left untouched.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (name, value) in vars {
        out = out.replace(&format!("{{{name}}}"), value);
    }
    out
}
