//! Experiment runner for the channel simulator: TOML configs, artifact
//! files and predefined suites.

pub mod config;
pub mod experiment;
pub mod matrix;

pub use config::{AdversarySpec, AlgorithmKind, AlgorithmSpec, ExperimentConfig, TypeSpec};
pub use experiment::{run_experiment, ExperimentResult};
