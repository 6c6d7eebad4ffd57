//! Command-line driver for `ncvd-core`: configuration files, CSV, VTK and
//! Matrix Market output, and the `run`, `convergence`, `stability` and
//! `validate-mms` subcommands.

pub mod cli;
pub mod commands;
pub mod config;
pub mod csv;
pub mod mtx;
pub mod vtk;

pub use cli::Cli;
pub use commands::{execute, CliError};
