//! Library surface of the harness so integration tests can drive the
//! commands without spawning processes.

pub mod commands;
pub mod config;
pub mod csvout;
pub mod parallel;

use std::path::Path;

use psgd_lab::error::Result;

pub use config::{build_experiment, load_config, Experiment, ExperimentConfig};

/// Builds an experiment from a config file; relative matrix paths resolve
/// against the config's directory.
pub fn experiment_from_file(path: &Path) -> Result<Experiment> {
    let cfg = load_config(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
    build_experiment(cfg, &base)
}
