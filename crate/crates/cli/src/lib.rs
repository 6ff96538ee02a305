//! Scenario files, orchestration and report emission for the
//! `impact-hedge` command line tool.

// `!(x > 0.0)` is used throughout so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod output;
pub mod run;
pub mod verify;

pub use config::{parse_config, ScenarioConfig, Subcommand};
pub use error::{CliError, Issue};
pub use output::{emit_outputs, output_dir};
pub use run::{run_scenario, Artifact, Metric, RunOutput, RunReport};
