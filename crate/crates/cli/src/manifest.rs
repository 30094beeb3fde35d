//! Run manifests.
//!
//! The manifest hash is the SHA-256 of the tool version and the canonical
//! resolved configuration (which includes the seed). It excludes the
//! timestamp and the worker count, so reruns of the same configuration
//! produce byte-identical data files.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use bmc_core::config::RunConfig;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<String>,
    /// Canonical `key = value` text of the resolved configuration.
    pub config: String,
    pub seed: u64,
    pub version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub hash: String,
}

pub fn config_hash(cfg: &RunConfig) -> String {
    let mut h = Sha256::new();
    h.update(b"bmc ");
    h.update(VERSION.as_bytes());
    h.update(b"\n");
    h.update(cfg.canonical_for_hash().as_bytes());
    hex::encode(h.finalize())
}

impl RunManifest {
    pub fn new(command: &str, config_path: Option<&Path>, cfg: &RunConfig) -> Self {
        Self {
            command: command.to_string(),
            config_path: config_path.map(|p| p.display().to_string()),
            config: cfg.canonical(),
            seed: cfg.seed,
            version: VERSION.to_string(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            hash: config_hash(cfg),
        }
    }

    /// Comment lines for output headers.
    pub fn header(&self) -> Vec<String> {
        vec![format!("manifest {}", self.hash)]
    }

    pub fn write(&self, dir: &Path) -> anyhow::Result<()> {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self)?;
        fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_workers_but_not_seed() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.workers = 8;
        assert_eq!(config_hash(&a), config_hash(&b));
        b.seed = 1;
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }
}
