//! Experiment driver for the structured mechanical model benchmarks:
//! configuration, artifact formats, the staged pipeline and report tables.

pub mod config;
pub mod error;
pub mod experiment;
pub mod formats;
pub mod report;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
pub use experiment::Runner;
