//! Command-line surface for `finsler-core`: spec files, reports and geodesic traces.

pub mod commands;
pub mod report;
pub mod specfile;
pub mod trace;

pub use commands::{run, Cli, CliError, Command};
