//! Command line front end for `qcrystal-core`: configuration files, run
//! manifests, JSON reports and tab-separated tables.

pub mod acceptance;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::RunConfig;
pub use error::CliError;
