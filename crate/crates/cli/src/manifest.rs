//! `manifest.json`: what produced an output directory.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use anyhow::Context;
use cursorbench_core::dataset::read_samples;
use cursorbench_core::prompts::{FeedbackTemplate, SystemPrompt, SystemPromptVariant};
use cursorbench_eval::BackendIdentity;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    /// Fully resolved configuration of the command.
    pub config: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_checksum: Option<String>,
    pub prompt_checksums: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<BackendIdentity>,
    pub started_at: String,
    pub finished_at: String,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, config: &impl Serialize) -> anyhow::Result<Self> {
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            config: serde_json::to_value(config)?,
            dataset_checksum: None,
            prompt_checksums: prompt_checksums(None),
            backend: None,
            started_at: now(),
            finished_at: String::new(),
        })
    }

    pub fn write(mut self, dir: &Path) -> anyhow::Result<Self> {
        self.finished_at = now();
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(&self)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(self)
    }

    pub fn read(dir: &Path) -> anyhow::Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Checksums of every shipped prompt text, plus the custom text when one is
/// in use.
pub fn prompt_checksums(prompt: Option<&SystemPrompt>) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for v in SystemPromptVariant::ALL {
        out.insert(format!("system/{}", v.name()), sha256_hex(v.template().as_bytes()));
    }
    for f in FeedbackTemplate::ALL {
        out.insert(format!("feedback/{}", f.name()), sha256_hex(f.template().as_bytes()));
    }
    if let Some(text) = prompt.and_then(|p| p.custom_text.as_deref()) {
        out.insert("system/custom_text".into(), sha256_hex(text.as_bytes()));
    }
    out
}

/// SHA-256 over the samples file followed by each referenced image, in order
/// of first reference, each prefixed by its relative path.
pub fn dataset_checksum(samples_path: &Path) -> anyhow::Result<String> {
    let base = samples_path.parent().unwrap_or(Path::new("."));
    let mut h = Sha256::new();
    let jsonl = std::fs::read(samples_path).with_context(|| format!("reading {}", samples_path.display()))?;
    h.update(&jsonl);
    let parsed = read_samples(samples_path)?;
    let mut seen = HashSet::new();
    for s in &parsed.items {
        if !seen.insert(s.image_path.as_str()) {
            continue;
        }
        let p = base.join(&s.image_path);
        let bytes = std::fs::read(&p).with_context(|| format!("reading {}", p.display()))?;
        h.update(s.image_path.as_bytes());
        h.update([0u8]);
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}
