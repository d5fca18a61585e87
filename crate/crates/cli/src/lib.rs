//! Command-line front end: metric files, reports and the subcommands.

pub mod commands;
pub mod metric_file;
pub mod report;
