use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::engine::RandomSource;
use crate::error::Result;

/// Streams used by one unit of work (one grid point).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub unit: String,
    pub seed: u64,
    pub stream: u64,
    /// Stream of every replica, in replica order.
    pub replica_streams: Vec<u64>,
}

impl SeedRecord {
    pub fn new(unit: impl Into<String>, source: &RandomSource, replicas: u64) -> Self {
        SeedRecord {
            unit: unit.into(),
            seed: source.seed,
            stream: source.stream,
            replica_streams: (0..replicas).map(|r| source.replica(r).stream).collect(),
        }
    }
}

/// Walks that left the simulated window, and runs whose infection outgrew the
/// region the window was sized for.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TruncationDiagnostics {
    pub window_exits: u64,
    pub outside_core: u64,
    pub fallbacks: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub code_version: String,
    pub wall_time_secs: f64,
    pub seeds: Vec<SeedRecord>,
    pub truncation: TruncationDiagnostics,
    pub warnings: Vec<String>,
    pub files: Vec<String>,
    pub summary: serde_json::Value,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}
