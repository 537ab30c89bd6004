//! Config files, the command pipelines and their on-disk outputs.

pub mod commands;
pub mod config;
pub mod kernel_suite;
pub mod output;

pub use commands::{execute, CommandKind, CommandOptions, Outcome};
pub use config::{emit_config, parse_config, ConfigError, RunManifest};
pub use output::{read_timeseries, write_timeseries, Report, Table};
