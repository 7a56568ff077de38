//! Run artifacts: output files are accumulated in memory and written
//! together with a manifest (resolved parameters, seed, content hash,
//! runtime), so a failed run leaves no partial outputs behind.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    subcommand: &'a str,
    params: &'a serde_json::Value,
    seed: u64,
    files: Vec<String>,
    content_hash: String,
    runtime_s: f64,
}

pub struct RunWriter {
    out_dir: PathBuf,
    subcommand: String,
    started: Instant,
    files: Vec<(String, Vec<u8>)>,
}

impl RunWriter {
    pub fn new(out_dir: &Path, subcommand: &str) -> RunWriter {
        RunWriter {
            out_dir: out_dir.to_path_buf(),
            subcommand: subcommand.to_string(),
            started: Instant::now(),
            files: Vec::new(),
        }
    }

    pub fn add_file(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents.into_bytes()));
    }

    /// Write all collected files plus the manifest; returns the content
    /// hash over the output files (manifest excluded, so identical runs
    /// hash identically regardless of runtime).
    pub fn commit<P: Serialize>(self, params: &P, seed: u64) -> Result<String> {
        std::fs::create_dir_all(&self.out_dir)
            .with_context(|| format!("creating {}", self.out_dir.display()))?;
        let mut hasher = Sha256::new();
        for (name, bytes) in &self.files {
            hasher.update(name.as_bytes());
            hasher.update([0u8]);
            hasher.update(bytes);
        }
        let content_hash = format!("{:x}", hasher.finalize());
        for (name, bytes) in &self.files {
            let path = self.out_dir.join(name);
            std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        }
        let params = serde_json::to_value(params)?;
        let manifest = Manifest {
            schema_version: SCHEMA_VERSION,
            subcommand: &self.subcommand,
            params: &params,
            seed,
            files: self.files.iter().map(|(n, _)| n.clone()).collect(),
            content_hash: content_hash.clone(),
            runtime_s: self.started.elapsed().as_secs_f64(),
        };
        let path = self.out_dir.join(format!("{}-manifest.json", self.subcommand));
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(content_hash)
    }
}
