use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::Command;

pub const MANIFEST_JSON: &str = "manifest.json";

/// Everything needed to repeat a run: the parsed command line, the resolved
/// global settings and the configuration the command actually used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub tool: String,
    pub version: String,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub command: Command,
    /// Command-specific resolved parameters (model config, data spec, ...).
    #[serde(default)]
    pub resolved: serde_json::Value,
}

impl RunConfig {
    pub fn new(command: Command, seed: Option<u64>, threads: Option<usize>, out: Option<PathBuf>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            threads,
            out,
            command,
            resolved: serde_json::Value::Null,
        }
    }

    pub fn write(&self, dir: &Path) -> anyhow::Result<PathBuf> {
        let path = dir.join(MANIFEST_JSON);
        wavessm::report::write_json(&path, self)?;
        Ok(path)
    }

    pub fn read(path: &Path) -> anyhow::Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
