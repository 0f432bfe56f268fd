//! `run_manifest.json`, written next to every subcommand's outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use hearingkit_core::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "run_manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    /// SHA-256 of the resolved arguments (flags plus config-file values).
    pub config_hash: String,
    pub config: serde_json::Value,
    pub input_checksums: BTreeMap<String, String>,
    pub seed: u64,
    pub tool_version: String,
    pub started_at: String,
    pub finished_at: String,
}

pub fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn config_hash(config: &serde_json::Value) -> String {
    // serde_json maps are ordered, so equal configs print identically.
    hex::encode(Sha256::digest(config.to_string().as_bytes()))
}

fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let entries = fs::read_dir(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    for entry in entries {
        let p = entry
            .map_err(|e| Error::Io {
                path: dir.to_path_buf(),
                source: e,
            })?
            .path();
        if p.is_dir() {
            walk(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

/// SHA-256 of a file, or for a directory of the sorted
/// `relative-path digest` lines of every file below it.
pub fn checksum(path: &Path) -> Result<String> {
    if !path.is_dir() {
        return file_digest(path);
    }
    let mut files = Vec::new();
    walk(path, &mut files)?;
    files.sort();
    let mut h = Sha256::new();
    for f in files {
        let rel = f.strip_prefix(path).unwrap_or(&f);
        h.update(format!("{} {}\n", rel.to_string_lossy(), file_digest(&f)?).as_bytes());
    }
    Ok(hex::encode(h.finalize()))
}

pub fn write(out_dir: &Path, manifest: &RunManifest) -> Result<()> {
    let path = out_dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::Io { path, source: e })
}
