//! Configuration parsing, CSV output and the `hivnsfd` subcommands.

pub mod commands;
pub mod config;
pub mod table;

pub use commands::{run_cli, simulate, Cli, CliError, Command, Outcome};
pub use config::{parse_config, ConfigError, Duration, InitialSpec, RunConfig, SweepSpec};
pub use table::{emit_csv, emit_sweep_csv, SeriesRow, SeriesTable, TableError};
