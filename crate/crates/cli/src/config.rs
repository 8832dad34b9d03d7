//! Run configuration file.
//!
//! A TOML file with one optional top-level `seed` and one table per stage:
//!
//! ```toml
//! seed = 7
//!
//! [generate]
//! composition = { character = 171, word = 48, line = 38 }
//!
//! [collect]
//! settle_delay_ms = 80
//!
//! [eval]
//! max_turns = 2
//! system_prompt = { variant = "baseline_cot" }
//!
//! [backend]
//! kind = "mock"
//! mock = { kind = "feedback_aware", offset = [40.0, 0.0], gamma = 0.5 }
//! ```
//!
//! Every key is optional. Command-line flags override the file, which
//! overrides the built-in defaults. The top-level seed is handed to every
//! randomized component; each derives its own streams from it by label.

use std::path::Path;

use anyhow::Context;
use cursorbench_collector::CollectorConfig;
use cursorbench_core::generate::GeneratorConfig;
use cursorbench_eval::{HarnessConfig, HttpBackendConfig, MockOracleConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Mock,
    OpenaiCompatible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub mock: MockOracleConfig,
    pub http: HttpBackendConfig,
    /// Environment variable holding the API key. The key itself never
    /// appears in config files or manifests.
    pub api_key_env: String,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Mock,
            mock: MockOracleConfig::default(),
            http: HttpBackendConfig::default(),
            api_key_env: "OPENAI_API_KEY".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub generate: GeneratorConfig,
    pub collect: CollectorConfig,
    pub eval: HarnessConfig,
    pub backend: BackendConfig,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn load_or_default(path: Option<&Path>) -> anyhow::Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    /// Seed precedence: flag, then file, then 0.
    pub fn resolve_seed(&self, flag: Option<u64>) -> u64 {
        flag.or(self.seed).unwrap_or(0)
    }
}
