//! The run manifest written next to every artifact: the fully resolved
//! configuration, tool version, seed and output inventory, so a run can be
//! replayed bit-for-bit from the manifest alone.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::ConfigFile;
use crate::CliError;

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    /// Unix timestamp of the run (informational; not part of the
    /// reproducibility contract).
    pub created_unix: u64,
    /// Fully resolved configuration, including every defaulted value.
    pub config: ConfigFile,
    /// Files written by the run, relative to the manifest's directory.
    pub outputs: Vec<String>,
    /// Headline numbers of the run, keyed by metric name.
    pub metrics: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, config: ConfigFile) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            config,
            outputs: Vec::new(),
            metrics: BTreeMap::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let body = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Runtime(format!("manifest serialization failed: {e}")))?;
        write_output(dir, "manifest.json", &body)
    }
}

/// Write a file into the output directory, creating it first.
pub fn write_output(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}
