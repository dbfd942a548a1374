//! File formats, experiment configs and subcommands for the `smdl` binary.

pub mod audit;
pub mod checkpoint;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod table;

pub use error::{LabError, Result};
