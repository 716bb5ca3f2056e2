//! Command-line front end of the walkrange engine.

pub mod commands;
pub mod config;
pub mod output;

pub use config::{parse_args, ParseOutcome, RunConfig};
