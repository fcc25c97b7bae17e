//! `manifest.json`: one record per pipeline run in an output directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Runs keyed by `simulate`, `verify:<ESTIMATE>` or `invert:<problem>`; a
/// rerun replaces its own record and keeps the others.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub runs: BTreeMap<String, RunRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    /// `ok`, or `failed: <message>`.
    pub status: String,
    pub seed: Option<u64>,
    /// Command-line overrides as given.
    pub options: BTreeMap<String, String>,
    /// Hash of the effective configuration text.
    pub config_sha256: String,
    /// Hashes of field files read by coefficient presets.
    pub inputs: BTreeMap<String, String>,
    /// Hashes of the files written, by file name.
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new() -> Manifest {
        Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            runs: BTreeMap::new(),
        }
    }

    pub fn load(dir: &Path) -> Result<Manifest> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn load_or_new(dir: &Path) -> Result<Manifest> {
        if dir.join(MANIFEST_FILE).exists() {
            let mut m = Manifest::load(dir)?;
            m.version = env!("CARGO_PKG_VERSION").to_string();
            Ok(m)
        } else {
            Ok(Manifest::new())
        }
    }

    pub fn insert(&mut self, key: String, record: RunRecord) {
        self.runs.insert(key, record);
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

impl Default for Manifest {
    fn default() -> Self {
        Manifest::new()
    }
}

impl RunRecord {
    pub fn new(
        command: &str,
        seed: Option<u64>,
        options: BTreeMap<String, String>,
        effective_config: &str,
        inputs: BTreeMap<String, String>,
    ) -> RunRecord {
        RunRecord {
            command: command.to_string(),
            status: "ok".to_string(),
            seed,
            options,
            config_sha256: sha256_hex(effective_config.as_bytes()),
            inputs,
            outputs: BTreeMap::new(),
        }
    }

    /// Records the outcome of the run.
    pub fn finish(mut self, outcome: &Result<Vec<(String, String)>>) -> RunRecord {
        match outcome {
            Ok(outputs) => self.outputs = outputs.iter().cloned().collect(),
            Err(e) => self.status = format!("failed: {e}"),
        }
        self
    }
}
