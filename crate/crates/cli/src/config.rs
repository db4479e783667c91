//! TOML experiment configuration: optional top-level `seed`, then one table
//! per command. Every key is optional; command-line flags take precedence.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub transform: TransformSection,
    #[serde(default)]
    pub sweep_ant: SweepSection,
    #[serde(default)]
    pub earlyterm: EarlytermSection,
    #[serde(default)]
    pub train: TrainSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformSection {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub dim: Option<usize>,
    pub block_size: Option<usize>,
    pub direction: Option<String>,
    pub order: Option<String>,
    pub matrix_out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub sigma_ant: Option<Vec<f64>>,
    pub sm: Option<Vec<f64>>,
    pub trials: Option<usize>,
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    pub bits: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EarlytermSection {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub distribution: Option<String>,
    pub bits: Option<u32>,
    pub cols: Option<usize>,
    pub trials: Option<usize>,
    pub center: Option<f64>,
    pub spread: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub classes: Option<usize>,
    pub dim: Option<usize>,
    pub samples_per_class: Option<usize>,
    pub block_size: Option<usize>,
    pub bits: Option<u32>,
    pub x_max: Option<f64>,
    pub t_max: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr: Option<f64>,
    pub lr_threshold: Option<f64>,
    pub lambda: Option<f64>,
    pub direction: Option<String>,
    pub path: Option<String>,
    pub tau_0: Option<f64>,
    pub tau_growth: Option<f64>,
    pub tau_step: Option<u64>,
    pub tau_max: Option<f64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Usage(msg) => CliError::Usage(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(e.message().to_string()))
    }
}
