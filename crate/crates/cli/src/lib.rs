//! Experiment runner for the graph alignment benchmark: instance
//! persistence, the solver sweep and result aggregation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod instance_io;
pub mod results;
pub mod runner;
pub mod summarize;

pub use config::{Method, RunConfig};
pub use error::{CliError, Result};
pub use instance_io::{cmd_generate, load_instance, save_instance};
pub use results::{read_results_file, Metrics, ResultRow};
pub use runner::{cmd_run, run_sweep};
pub use summarize::{cmd_summarize, summarize, SummaryRow};
