//! Dataset and batch manifests: every batch subcommand records what it
//! produced, from which seed and config, with per-item status. Paths are
//! stored relative to the manifest so a dataset directory can be moved (and
//! so re-runs into different directories stay byte-identical). Maps are
//! ordered, and nothing time- or host-dependent is recorded.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{CliError, Result};

/// One produced (or failed) item in a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    /// Relative paths of the artifacts this item produced.
    pub files: Vec<String>,
    /// RNG seed the item was produced from.
    pub seed: u64,
    pub tags: BTreeMap<String, String>,
    /// "ok" or an error description; resume skips only "ok" entries.
    pub status: String,
}

impl ManifestEntry {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Manifest for a whole batch run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    /// Which subcommand produced this manifest.
    pub kind: String,
    pub config_hash: String,
    /// Effective configuration, echoed in full.
    pub config: PipelineConfig,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(kind: impl Into<String>, config: &PipelineConfig) -> Self {
        Self {
            kind: kind.into(),
            config_hash: config.hash(),
            config: config.clone(),
            entries: Vec::new(),
        }
    }

    pub fn failed(&self) -> usize {
        self.entries.iter().filter(|e| !e.is_ok()).count()
    }

    /// Entry ids already completed, for resumable batches.
    pub fn completed(&self, dir: &Path) -> BTreeMap<String, ManifestEntry> {
        self.entries
            .iter()
            .filter(|e| e.is_ok() && e.files.iter().all(|f| dir.join(f).exists()))
            .map(|e| (e.id.clone(), e.clone()))
            .collect()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut json = serde_json::to_string_pretty(self).expect("manifest serializes");
        json.push('\n');
        std::fs::write(path, json).map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::blob(path, format!("manifest: {e}")))
    }
}
