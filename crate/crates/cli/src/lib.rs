//! Batch driver for distributional regression: reads a TOML run
//! configuration and a CSV dataset, runs a fit, cross-validation, hold-out
//! scoring or a simulation study, and writes plot-ready CSV tables.
//!
//! Exit codes: 0 success, 2 configuration, 3 data, 4 numerical and 5 I/O
//! failures.

pub mod config;
pub mod error;
pub mod io;
pub mod simulate;
pub mod tasks;

pub use config::{RunConfig, Task};
pub use error::{CliError, ErrorKind, Result};
pub use simulate::{run_simulation, SimulationReport, SimulationScenario};
pub use tasks::{run, run_cv, run_fit, run_score, run_simulate, Artifacts};
