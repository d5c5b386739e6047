//! Command-line front end for the `bootbandit` simulator: TOML
//! configuration, the four subcommands, and the CSV result formats.

mod commands;
pub mod config;
mod error;
pub mod output;

pub use commands::{
    cmd_sample_surfaces, cmd_simulate, cmd_tune, cmd_validate_design, GridFile, Overrides,
    SampleOutcome, SimulateOutcome, TuneOutcome,
};
pub use config::{load_config, parse_config, ConfigFile, LoadedConfig, TunedOverride};
pub use error::{CliError, Result};
