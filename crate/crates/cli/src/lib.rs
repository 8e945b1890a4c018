//! Batch driver for the `seqmatch` pipeline: configuration handling and
//! the subcommands behind the `seqmatch` binary.

pub mod commands;
pub mod config;

pub use config::RunConfig;
