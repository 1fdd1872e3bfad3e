//! Monte-Carlo campaigns: random ground-truth distributions, data sets drawn
//! from them, all requested variants solved per data set, and realized
//! distortion and leakage measured under the ground truth.

pub mod check;
pub mod cli;
pub mod config;
pub mod runner;
pub mod stats;

pub use check::{run_support_checks, support_checks_csv, SupportCheck};
pub use cli::cli_main;
pub use config::{resolve_workers, ExperimentConfig, WORKERS_ENV};
pub use runner::{run_instance, run_scatter, run_sweep, InstanceRecord, ScatterOutput, SweepOutput};
pub use stats::{quartiles, summarize, Summary};
