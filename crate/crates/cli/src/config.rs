//! Optional TOML config file: per-subcommand tables whose keys fill in
//! flags that were not given on the command line. Explicit flags always
//! win.

use std::path::Path;

use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub gen: GenSection,
    #[serde(default)]
    pub calibrate: CalibrateSection,
    #[serde(default)]
    pub resilience: ResilienceSection,
    #[serde(default)]
    pub dse: DseSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenSection {
    pub antennas: Option<usize>,
    pub gain_spread: Option<f64>,
    pub noise_sigma: Option<f64>,
    pub rank: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateSection {
    pub backend: Option<String>,
    pub n_ax: Option<usize>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResilienceSection {
    pub em: Option<String>,
    pub ep: Option<String>,
    pub er: Option<String>,
    pub nax: Option<String>,
    pub nax_unit: Option<String>,
    pub trials: Option<u32>,
    pub sites: Option<String>,
    pub er_fixed: Option<f64>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DseSection {
    pub p_acc: Option<f64>,
    pub anchor_power: Option<f64>,
    pub anchor_bits: Option<u32>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
}

pub fn load(path: Option<&Path>) -> Result<ConfigFile, CliError> {
    match path {
        None => Ok(ConfigFile::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Io(format!("config {}: {e}", p.display())))?;
            toml::from_str(&text)
                .map_err(|e| CliError::Validation(format!("config {}: {e}", p.display())))
        }
    }
}

/// Reads a datapath description (TOML mirror of `DatapathConfig`).
pub fn load_datapath(path: &Path) -> Result<axcal_core::DatapathConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("datapath {}: {e}", path.display())))?;
    let dp: axcal_core::DatapathConfig = toml::from_str(&text)
        .map_err(|e| CliError::Validation(format!("datapath {}: {e}", path.display())))?;
    dp.validate().map_err(CliError::validation)?;
    Ok(dp)
}
