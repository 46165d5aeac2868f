//! Experiment driver behind the `latgauge` binary.

pub mod config;
pub mod experiments;
pub mod run;

pub use config::{parse_config, parse_config_with, ConfigError, Experiment, ExperimentConfig};
pub use experiments::{run_experiment, Check, ExperimentOutput, RunError};
pub use run::{rerun, run, RerunReport, RunManifest};
