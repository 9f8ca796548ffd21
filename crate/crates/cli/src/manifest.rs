//! Run manifests: every file-producing invocation records the fully
//! resolved parameters next to its outputs. Re-running the recorded `args`
//! reproduces the outputs byte for byte (the timestamp is metadata, not an
//! input).

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::error::CliError;
use crate::output;

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    /// Command-line arguments as invoked (without the program name).
    pub args: Vec<String>,
    /// Fully resolved configuration after config-file merging.
    pub resolved: serde_json::Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seed: Option<u64>,
    pub timestamp_unix: u64,
}

impl Manifest {
    pub fn new(
        subcommand: &'static str,
        resolved: serde_json::Value,
        inputs: Vec<PathBuf>,
        outputs: Vec<PathBuf>,
        seed: Option<u64>,
    ) -> Self {
        Manifest {
            tool: "axcal",
            version: env!("CARGO_PKG_VERSION"),
            subcommand,
            args: std::env::args().skip(1).collect(),
            resolved,
            inputs,
            outputs,
            seed,
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let json = serde_json::to_string_pretty(self)?;
        output::write_atomic(path, json.as_bytes())
    }
}
