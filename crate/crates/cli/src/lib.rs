//! Command-line front end: PSM table I/O, run reports and the `tdcfdr`
//! subcommands.

pub mod args;
pub mod commands;
pub mod report;
pub mod table;

pub use args::Cli;
pub use commands::{run, CliError, Status};
pub use report::RunReport;
pub use table::{KeyMode, PsmTable, ReadOptions};
