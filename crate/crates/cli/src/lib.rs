//! Experiment orchestration for `npenas-core`: benchmark and trial file
//! formats, configuration, parallel trial execution, aggregation and the
//! sampler, predictor and fan-out studies behind the `npenas` binary.

pub mod archjson;
pub mod bench;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod record;
pub mod runner;
pub mod studies;

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult};
