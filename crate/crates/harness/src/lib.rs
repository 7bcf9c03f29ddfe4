//! Experiment runner: configuration, orchestration across seeds, graphs and
//! algorithms, and CSV, JSON and figure output.

pub mod config;
pub mod experiment;
pub mod output;
pub mod plots;
pub mod report;
pub mod suites;

pub use config::ExperimentConfig;
pub use experiment::{run_experiment, ExperimentOutput};
