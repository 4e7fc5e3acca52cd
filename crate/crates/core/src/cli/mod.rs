//! Config-file driven experiments with deterministic plain-text outputs.

mod config;
mod run;

pub use config::{parse_config, ConfigError, Flow, RunConfig, Subcommand, OUT_ENV};
pub use run::{g6, run, run_text, RunError};
