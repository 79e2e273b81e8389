//! Std companion to `recal_core`: CSV streams, JSON checkpoints,
//! experiment configuration, the experiment harness and the `recal` CLI.

pub mod checkpoint;
pub mod config;
pub mod csv_io;
pub mod error;
pub mod harness;

pub use config::{ExperimentConfig, ExperimentKind, ForecasterKind};
pub use error::{Error, Result};
pub use harness::{execute, recalibrate_csv, run_experiment, ExperimentReport, Summary};
