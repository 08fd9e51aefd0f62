//! Per-command run manifests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileHash {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<String>,
    /// Wall-clock seconds; the only field that varies between identical runs.
    pub duration_secs: f64,
}

impl RunManifest {
    pub fn new(command: &str, config: &impl Serialize) -> Result<Self> {
        Ok(Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: serde_json::to_value(config)?,
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            duration_secs: 0.0,
        })
    }

    pub fn seed(mut self, name: &str, value: u64) -> Self {
        self.seeds.insert(name.to_string(), value);
        self
    }

    pub fn input(&mut self, role: &str, path: &Path) -> Result<String> {
        let sha256 = sha256_file(path)?;
        self.inputs.push(FileHash {
            role: role.to_string(),
            path: path.display().to_string(),
            sha256: sha256.clone(),
        });
        Ok(sha256)
    }

    pub fn input_hash(&self, role: &str) -> Option<&str> {
        self.inputs
            .iter()
            .find(|f| f.role == role)
            .map(|f| f.sha256.as_str())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        cgexplain::json::write_file(path, self)
            .with_context(|| format!("writing manifest {}", path.display()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        cgexplain::json::read_file(path)
            .with_context(|| format!("reading manifest {}", path.display()))
    }
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_bytes(&bytes))
}

/// `data.json` -> `data.manifest.json`.
pub fn manifest_for_file(path: &Path) -> PathBuf {
    path.with_extension("manifest.json")
}

/// Manifest of a directory output.
pub fn manifest_for_dir(dir: &Path) -> PathBuf {
    dir.join("manifest.json")
}
