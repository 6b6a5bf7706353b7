//! File formats, experiment configs and the `fatra` command line.

pub mod checkpoint;
pub mod cli;
pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod records;
pub mod report;

pub use error::{CliError, Result};
