//! Command-line driver: reads the input files, runs one pipeline stage and
//! writes its CSV artifacts plus a manifest (settings, seed and SHA-256
//! hashes of every input and output) into the output directory.

pub mod config;
pub mod error;
pub mod run;

pub use config::PipelineConfig;
pub use error::{CliError, CliResult};
pub use run::{run_decovid, run_factors, run_forecast, run_simulate, run_uncertainty, run_var, RunOutput};
