//! Command-line front end for the occupation-time library: density grids,
//! Euler–Maruyama sampling, grid comparisons, and figure-scale dataset
//! reproduction, all with deterministic CSV/JSON outputs.
//!
//! The binary is `occtime`; see [`cli::run`] for the exit-code contract.

pub mod checks;
pub mod cli;
pub mod config;
pub mod output;

pub use cli::{run, Cli};
