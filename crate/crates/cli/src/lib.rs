//! Configuration, experiment wiring and CSV output for the `legrad` binary.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiments;
pub mod ingest;

pub use config::{parse_config, parse_sources, ExperimentConfig, Parsed};
pub use experiments::{run_experiment, run_in, RunError, RunSummary};
