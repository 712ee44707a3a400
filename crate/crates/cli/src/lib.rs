//! Experiment driver around the `shiftmark` library: JSON configs in,
//! deterministic JSON reports out.

pub mod config;
pub mod report;
pub mod run;

pub use config::{ConfigError, ExperimentConfig};
pub use report::{deterministic_json, Report};
pub use run::{execute, RunOptions, Stage};
