//! Run manifest: resolved configuration plus a SHA-256 of every file a run
//! wrote. Written after all other outputs.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::args::Opts;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Loadable with `--config` to repeat the run.
    pub config: Opts,
    pub seed: u64,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub parallel_build: bool,
    pub outputs: Vec<OutputEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Tracks files as they are written.
#[derive(Debug, Default)]
pub struct Outputs {
    pub entries: Vec<OutputEntry>,
}

impl Outputs {
    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.entries.push(OutputEntry {
            path: path.to_path_buf(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn finish(self, path: &Path, command: &str, config: Opts, seed: u64) -> Result<Manifest> {
        let manifest = Manifest {
            tool: "ilc".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
            seed,
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            parallel_build: ilc_core::parallel::is_parallel_available(),
            outputs: self.entries,
        };
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(manifest)
    }
}
