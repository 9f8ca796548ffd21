//! Batch front end for the calibration resilience and accelerator toolkit.
//!
//! Subcommands: `gen` (synthetic problems), `calibrate` (single runs),
//! `resilience` (injection parameter sweeps), `dse` (truncation design-space
//! exploration), `energy` (two-core savings arithmetic). Every invocation
//! that writes files also writes a manifest with the fully resolved
//! arguments; re-running those arguments reproduces the outputs byte for
//! byte.

mod args;
mod commands;
mod config;
mod error;
mod manifest;
mod output;
mod ranges;

use clap::Parser;
use std::process::ExitCode;

use crate::args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => commands::gen::run(a),
        Command::Calibrate(a) => commands::calibrate::run(a),
        Command::Resilience(a) => commands::resilience::run(a),
        Command::Dse(a) => commands::dse::run(a),
        Command::Energy(a) => commands::energy::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
