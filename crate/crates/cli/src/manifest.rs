//! Run manifests: every command records what it read, what it wrote, and
//! the seed it ran with, beside its outputs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct InputStamp {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config_path: Option<String>,
    pub seed: Option<u64>,
    pub inputs: Vec<InputStamp>,
    pub outputs: Vec<String>,
    pub duration_ms: u128,
}

pub struct ManifestBuilder {
    command: String,
    config_path: Option<String>,
    seed: Option<u64>,
    inputs: Vec<InputStamp>,
    outputs: Vec<PathBuf>,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            config_path: None,
            seed: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn config_path(&mut self, path: &Path) -> &mut Self {
        self.config_path = Some(path.display().to_string());
        self
    }

    pub fn seed(&mut self, seed: u64) -> &mut Self {
        self.seed = Some(seed);
        self
    }

    pub fn input(&mut self, path: &Path) -> Result<&mut Self> {
        let bytes = std::fs::read(path)
            .with_context(|| format!("cannot read input file {}", path.display()))?;
        let digest = Sha256::digest(&bytes);
        let mut hex = String::with_capacity(64);
        for byte in digest {
            hex.push_str(&format!("{byte:02x}"));
        }
        self.inputs.push(InputStamp {
            path: path.display().to_string(),
            sha256: hex,
        });
        Ok(self)
    }

    pub fn output(&mut self, path: &Path) -> &mut Self {
        self.outputs.push(path.to_path_buf());
        self
    }

    /// Writes `<command>.manifest.json` into the directory.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let manifest = RunManifest {
            command: self.command.clone(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_path: self.config_path.clone(),
            seed: self.seed,
            inputs: self
                .inputs
                .iter()
                .map(|s| InputStamp {
                    path: s.path.clone(),
                    sha256: s.sha256.clone(),
                })
                .collect(),
            outputs: self.outputs.iter().map(|p| p.display().to_string()).collect(),
            duration_ms: self.started.elapsed().as_millis(),
        };
        let path = dir.join(format!("{}.manifest.json", self.command));
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)
            .with_context(|| format!("cannot write manifest {}", path.display()))?;
        Ok(path)
    }
}
