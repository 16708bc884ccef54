//! Experiment harness around `hhgnn-core`: configuration, synthetic data and
//! the command implementations behind the `hhgnn` binary.

pub mod commands;
pub mod config;
pub mod synth;

pub use config::ExperimentConfig;
