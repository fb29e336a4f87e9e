//! Output directory bookkeeping and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{render_config, ExperimentPlan};
use crate::error::{Result, RunError};
use crate::table::Table;

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FileEntry {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Manifest {
    pub program: String,
    pub version: String,
    pub kind: String,
    /// Every plan value, explicit, in config syntax.
    pub config: String,
    pub config_sha256: String,
    pub base_seed: u64,
    pub member_seeds: Vec<u64>,
    pub warnings: Vec<String>,
    pub files: Vec<FileEntry>,
}

/// Collects the CSV files of one run and writes the manifest last.
#[derive(Debug)]
pub struct ArtifactSet {
    dir: PathBuf,
    config: String,
    config_sha256: String,
    kind: String,
    base_seed: u64,
    member_seeds: Vec<u64>,
    warnings: Vec<String>,
    files: Vec<FileEntry>,
}

impl ArtifactSet {
    pub fn create(dir: &Path, plan: &ExperimentPlan) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
        let config = render_config(plan);
        Ok(ArtifactSet {
            dir: dir.to_path_buf(),
            config_sha256: sha256_hex(config.as_bytes()),
            config,
            kind: plan.kind.to_string(),
            base_seed: plan.base_seed,
            member_seeds: Vec::new(),
            warnings: Vec::new(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn config_sha256(&self) -> &str {
        &self.config_sha256
    }

    pub fn set_member_seeds(&mut self, seeds: Vec<u64>) {
        self.member_seeds = seeds;
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Writes `table` as `name` with the config hash prepended to its metadata.
    pub fn write(&mut self, name: &str, table: Table) -> Result<()> {
        let mut table = table;
        table.meta.insert(0, ("config_sha256".into(), self.config_sha256.clone()));
        let bytes = table.write(&self.dir.join(name))?;
        self.files.push(FileEntry {
            name: name.to_string(),
            bytes: bytes.len(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    pub fn finish(self) -> Result<Manifest> {
        let manifest = Manifest {
            program: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            kind: self.kind,
            config: self.config,
            config_sha256: self.config_sha256,
            base_seed: self.base_seed,
            member_seeds: self.member_seeds,
            warnings: self.warnings,
            files: self.files,
        };
        let path = self.dir.join(MANIFEST_NAME);
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        fs::write(&path, text).map_err(|e| RunError::io(&path, e))?;
        Ok(manifest)
    }
}
