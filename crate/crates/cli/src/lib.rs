//! Command-line front end of `ilc-core`: per-point reports, sweeps with CSV
//! and heatmap output, plant checks, boundary export and method comparison.

pub mod args;
pub mod commands;
pub mod manifest;
pub mod pixmap;
pub mod table;

pub use args::{Cli, Command, Opts};
