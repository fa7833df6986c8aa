//! Synthetic data, experiment runners and result files for the `phasor` tool.

pub mod data;
pub mod experiments;
pub mod report;
pub mod runners;

pub use experiments::{Experiment, Registry, RunContext};
pub use report::{Check, Comparison, ExperimentResult, Format, Table};
