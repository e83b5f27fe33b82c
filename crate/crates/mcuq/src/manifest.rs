//! Run manifests: every command writes `<output>.manifest.json` recording
//! the invocation, resolved configuration, seed, library version, input and
//! output digests, and wall-clock timings. Outputs are pure functions of
//! (inputs, flags, seed), so re-running the recorded argv reproduces them
//! byte for byte; the digests make that checkable.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub version: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub timings: Timings,
}

#[derive(Serialize)]
pub struct Timings {
    pub total_seconds: f64,
}

pub struct ManifestBuilder {
    command: String,
    argv: Vec<String>,
    config: serde_json::Value,
    seed: Option<u64>,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str, argv: Vec<String>, config: serde_json::Value, seed: Option<u64>) -> Self {
        Self {
            command: command.to_string(),
            argv,
            config,
            seed,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            started: Instant::now(),
        }
    }

    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.insert(path.display().to_string(), file_digest(path)?);
        Ok(())
    }

    pub fn record_output(&mut self, path: &Path) -> Result<()> {
        self.outputs.insert(path.display().to_string(), file_digest(path)?);
        Ok(())
    }

    /// Writes `<primary_output>.manifest.json`.
    pub fn write(self, primary_output: &Path) -> Result<()> {
        let manifest = RunManifest {
            command: self.command,
            argv: self.argv,
            config: self.config,
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: self.inputs,
            outputs: self.outputs,
            timings: Timings { total_seconds: self.started.elapsed().as_secs_f64() },
        };
        let path = manifest_path(primary_output);
        let json = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(&path, json + "\n")
            .with_context(|| format!("cannot write {}", path.display()))?;
        Ok(())
    }
}

pub fn manifest_path(output: &Path) -> std::path::PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes =
        std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("sha256:{:x}", hasher.finalize()))
}
