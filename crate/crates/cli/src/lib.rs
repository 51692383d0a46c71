//! Command-line front end for `pollregen`: scenario validation, spectral
//! analysis, Monte Carlo runs, parameter sweeps and the fluid and
//! multiplicative companion models, all writing CSV.

pub mod analysis;
pub mod commands;
pub mod output;

pub use commands::{CliError, Globals, Source, Status};
