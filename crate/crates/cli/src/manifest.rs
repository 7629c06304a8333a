use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use serde::{Deserialize, Serialize};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputFile {
    /// Path relative to the manifest's directory.
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timing {
    pub label: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedStatus {
    pub seed: u64,
    pub method: String,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Record of one command invocation. `config` is enough to rerun it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub toolkit_version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub outputs: Vec<OutputFile>,
    #[serde(default)]
    pub status: Vec<SeedStatus>,
    pub timings: Vec<Timing>,
}

impl RunManifest {
    pub fn new(command: &str, config: impl Serialize, seeds: Vec<u64>) -> anyhow::Result<Self> {
        Ok(RunManifest {
            toolkit_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: serde_json::to_value(config)?,
            seeds,
            outputs: Vec::new(),
            status: Vec::new(),
            timings: Vec::new(),
        })
    }

    pub fn output(&mut self, path: impl Into<String>, seed: Option<u64>, method: Option<String>) {
        self.outputs.push(OutputFile {
            path: path.into(),
            seed,
            method,
        });
    }

    pub fn time(&mut self, label: impl Into<String>, since: Instant) {
        self.timings.push(Timing {
            label: label.into(),
            seconds: since.elapsed().as_secs_f64(),
        });
    }

    pub fn write(&self, dir: &Path) -> anyhow::Result<()> {
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, serde_json::to_string_pretty(self)? + "\n")
            .with_context(|| format!("cannot write {}", path.display()))
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read manifest {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid manifest {}", path.display()))
    }
}
