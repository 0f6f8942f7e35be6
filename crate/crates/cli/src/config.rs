//! Optional TOML config. Every key has a matching flag; flags win.
//!
//! ```toml
//! dataset = "kitgi.jsonl"
//!
//! [knowledge]
//! limit = 5
//! base_url = "https://api.conceptnet.io"
//! cache_dir = ".kitgi/kg-cache"
//! fixture_dir = "fixtures/kg"
//! concurrency = 4
//!
//! [generation]
//! backend = "stub"            # stub | http | subprocess
//! endpoint = "http://localhost:8000/v1/completions"
//! command = "./complete.sh"
//! model = "t5-large"
//! temperature = 0.0
//! max_tokens = 64
//! seed = 7
//! concurrency = 4
//! timeout_secs = 60
//! template = "prompt.toml"
//! renumber = true
//!
//! [service]
//! addr = "127.0.0.1:8080"
//! data_dir = ".kitgi/service"
//! ui_dir = "webui/dist"
//! lease_secs = 900
//!
//! [report]
//! out_dir = "report"
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::failure::Failure;

pub const CONFIG_ENV: &str = "KITGI_CONFIG";

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub dataset: Option<PathBuf>,
    #[serde(default)]
    pub knowledge: KnowledgeConfig,
    #[serde(default)]
    pub generation: GenerationConfig,
    #[serde(default)]
    pub service: ServiceConfig,
    #[serde(default)]
    pub report: ReportConfig,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnowledgeConfig {
    pub limit: Option<usize>,
    pub base_url: Option<String>,
    pub cache_dir: Option<PathBuf>,
    pub fixture_dir: Option<PathBuf>,
    pub concurrency: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationConfig {
    pub backend: Option<String>,
    pub endpoint: Option<String>,
    pub command: Option<String>,
    pub model: Option<String>,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    pub seed: Option<u64>,
    pub concurrency: Option<usize>,
    pub timeout_secs: Option<u64>,
    pub template: Option<PathBuf>,
    pub renumber: Option<bool>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    pub addr: Option<String>,
    pub data_dir: Option<PathBuf>,
    pub ui_dir: Option<PathBuf>,
    pub lease_secs: Option<i64>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    pub out_dir: Option<PathBuf>,
}

impl Config {
    /// Loads `path`, or returns an empty config when none is given.
    pub fn load(path: Option<&Path>) -> Result<Config, Failure> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
        toml::from_str(&text)
            .map_err(|e| Failure::User(format!("{}: {}", path.display(), e.message())))
    }
}
