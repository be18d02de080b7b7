use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: PathBuf,
    pub sha256: String,
}

/// Provenance record written next to the outputs of every command.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub scenario_hash: Option<String>,
    pub config: Value,
    /// Command-specific results worth keeping next to the config.
    pub summary: Value,
    pub elapsed_ms: u128,
    pub outputs: Vec<OutputFile>,
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>, scenario_hash: Option<String>, config: Value) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            scenario_hash,
            config,
            summary: Value::Null,
            elapsed_ms: 0,
            outputs: Vec::new(),
        }
    }

    pub fn with_summary(mut self, summary: Value) -> Self {
        self.summary = summary;
        self
    }

    /// Hashes the written files and stores the manifest as
    /// `<command>.manifest.json` in `out`.
    pub fn finish(mut self, start: Instant, out: &Path, written: Vec<PathBuf>) -> Result<()> {
        for path in written {
            let bytes = fs::read(out.join(&path)).with_context(|| format!("cannot hash {}", path.display()))?;
            self.outputs.push(OutputFile { path, sha256: hex::encode(Sha256::digest(&bytes)) });
        }
        self.elapsed_ms = start.elapsed().as_millis();
        let file = out.join(format!("{}.manifest.json", self.command));
        fs::create_dir_all(out)?;
        fs::write(&file, serde_json::to_string_pretty(&self)?)
            .with_context(|| format!("cannot write {}", file.display()))?;
        Ok(())
    }
}
