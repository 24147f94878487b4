//! Pipeline behind the `hardem` binary: precompute solution sets, train a
//! scorer, evaluate a checkpoint and compare evaluations.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use error::CliError;
