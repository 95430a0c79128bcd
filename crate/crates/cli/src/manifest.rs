use std::path::Path;

use dgff_core::field::SAMPLER_VERSION;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSeed {
    pub task: String,
    pub disorder_id: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputChecksum {
    pub file: String,
    pub sha256: String,
}

/// Everything needed to rerun an experiment and check that it reproduced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    /// The configuration in its key-value file format.
    pub config: String,
    pub code_version: String,
    pub sampler_version: u64,
    pub master_seed: u64,
    pub workers: usize,
    pub seeds: Vec<TaskSeed>,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<OutputChecksum>,
}

impl RunManifest {
    pub fn new(config: &ExperimentConfig, workers: usize) -> Self {
        RunManifest {
            experiment: config.experiment.to_string(),
            config: config.serialize(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            sampler_version: SAMPLER_VERSION,
            master_seed: config.seed,
            workers,
            seeds: Vec::new(),
            wall_clock_seconds: 0.0,
            outputs: Vec::new(),
        }
    }

    pub fn config(&self) -> Result<ExperimentConfig> {
        ExperimentConfig::parse(&self.config)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
