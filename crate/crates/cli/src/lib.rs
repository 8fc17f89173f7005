//! Batch experiment driver for sparse Bayesian system identification:
//! config parsing, built-in data generators, and the run/validate/compare/
//! simulate verbs used by the `bayesid` binary.

pub mod config;
pub mod generators;
pub mod runner;

pub use config::ExperimentConfig;
pub use runner::RunReport;
