//! Experiment harness for the `ashbm` solvers: problem generation, seeded
//! multi-trial runs, block-size sweeps and bound reports.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod io;

pub use config::{ExperimentConfig, OutputFormat, ProblemSource};
pub use error::{CliError, CliResult};
pub use experiment::{trial_seed, Experiment, Stats, Summary};
