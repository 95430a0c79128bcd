//! Experiment runner for `dgff-core`: configuration files, run manifests, deterministic
//! CSV/JSON outputs and the `dgff-lab` command line.

pub mod app;
pub mod config;
mod error;
pub mod experiments;
pub mod manifest;
pub mod output;

pub use config::{Experiment, ExperimentConfig};
pub use error::{CliError, Result};
pub use experiments::{run_experiment, RunOutcome};
pub use manifest::RunManifest;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const CHECK_FAILED: i32 = 2;
}
