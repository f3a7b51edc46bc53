//! Experiment runner for the boundary-driven Kac lattice gas: configuration files,
//! pipelines that chain the particle, PDE and rate-functional layers, and result
//! manifests with checksums.

pub mod config;
pub mod io;
pub mod manifest;
pub mod run;

pub use config::{parse_config, parse_config_for, ConfigError, ExperimentConfig, Kind};
pub use manifest::ResultManifest;
pub use run::{run, RunError, RunOutcome};
