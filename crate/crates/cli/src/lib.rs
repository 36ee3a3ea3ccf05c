//! Experiment orchestration for the `hsctc` command-line tool: configuration,
//! sweeps with resumable CSV output, and the bundled threshold tables.

pub mod commands;
pub mod config;
pub mod output;
pub mod runner;
pub mod tables;

pub use config::{ExperimentConfig, RawConfig};
pub use output::{Output, SCHEMA_VERSION};
