//! Run manifests: one JSON document per run directory recording input
//! digests, effective configuration, and a digest of every output file.
//!
//! The run directory name is derived from the digests of the inputs plus the
//! configuration, so re-running with identical inputs lands in the same
//! directory with identical bytes. The manifest timestamp honors
//! `SOURCE_DATE_EPOCH` for fully reproducible manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    created_utc: String,
    inputs: &'a BTreeMap<String, String>,
    config: &'a BTreeMap<String, String>,
    outputs: &'a BTreeMap<String, String>,
    notes: &'a [String],
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex::encode(hasher.finalize())
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

fn timestamp() -> String {
    let now = match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(value) => {
            let secs: i64 = value.parse().unwrap_or(0);
            chrono::DateTime::from_timestamp(secs, 0).unwrap_or_default()
        }
        Err(_) => chrono::Utc::now(),
    };
    now.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

/// Collects outputs as they are written and emits `manifest.json` last.
pub struct ManifestBuilder {
    run_dir: PathBuf,
    command: String,
    inputs: BTreeMap<String, String>,
    config: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    notes: Vec<String>,
}

impl ManifestBuilder {
    /// Digest the inputs and configuration, derive the run directory name,
    /// and create the directory.
    pub fn create(
        out_root: &Path,
        command: &str,
        config: BTreeMap<String, String>,
        input_paths: &[PathBuf],
    ) -> Result<Self> {
        let mut inputs = BTreeMap::new();
        for path in input_paths {
            inputs.insert(path.display().to_string(), sha256_file(path)?);
        }

        let mut hasher = Sha256::new();
        hasher.update(env!("CARGO_PKG_VERSION").as_bytes());
        hasher.update(command.as_bytes());
        for (key, value) in &config {
            hasher.update(key.as_bytes());
            hasher.update(b"=");
            hasher.update(value.as_bytes());
            hasher.update(b"\n");
        }
        for digest in inputs.values() {
            hasher.update(digest.as_bytes());
        }
        let run_id = hex::encode(&hasher.finalize()[..6]);

        let run_dir = out_root.join(format!("{command}-{run_id}"));
        fs::create_dir_all(&run_dir)
            .with_context(|| format!("creating {}", run_dir.display()))?;
        Ok(ManifestBuilder {
            run_dir,
            command: command.to_string(),
            inputs,
            config,
            outputs: BTreeMap::new(),
            notes: Vec::new(),
        })
    }

    pub fn run_dir(&self) -> &Path {
        &self.run_dir
    }

    /// Write one output file (creating parent directories) and record its
    /// digest under its run-relative path.
    pub fn write_file(&mut self, relative: &str, contents: &[u8]) -> Result<()> {
        let path = self.run_dir.join(relative);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.outputs
            .insert(relative.to_string(), sha256_hex(contents));
        Ok(())
    }

    pub fn note(&mut self, message: impl Into<String>) {
        self.notes.push(message.into());
    }

    /// Serialize `manifest.json`; call after all outputs are written.
    pub fn finalize(self) -> Result<PathBuf> {
        let manifest = RunManifest {
            tool: "ecomplex",
            version: env!("CARGO_PKG_VERSION"),
            command: &self.command,
            created_utc: timestamp(),
            inputs: &self.inputs,
            config: &self.config,
            outputs: &self.outputs,
            notes: &self.notes,
        };
        let path = self.run_dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }
}
