//! File formats, Gantt export and subcommands behind the `sbatch` binary.

pub mod commands;
pub mod config;
pub mod files;
pub mod fixtures;
pub mod gantt;

pub use commands::{Exit, Outcome};
