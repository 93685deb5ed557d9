use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::TrainConfig;
use crate::model::ModelConfig;
use crate::Result;

/// Losses recorded at the end of one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean mini-batch loss over the epoch (training mode).
    pub train_loss: f64,
    pub val_mse: f64,
}

/// Everything needed to audit and reproduce one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub dataset: String,
    pub lookback: usize,
    pub horizon: usize,
    pub seed: u64,
    pub fingerprint: String,
    pub test_mse: f64,
    pub test_mae: f64,
    /// Train-split MSE of the returned (best-val) parameters, inference mode.
    pub train_mse: f64,
    pub best_epoch: usize,
    pub best_val_mse: f64,
    pub steps: usize,
    pub stopped_early: bool,
    pub epochs: Vec<EpochRecord>,
    pub train_windows: usize,
    pub val_windows: usize,
    pub test_windows: usize,
    pub param_count: usize,
    pub seconds: f64,
    pub model: ModelConfig,
    pub train: TrainConfig,
    /// Resolved per-scale embedding widths.
    pub scale_dims: Vec<usize>,
    /// Effective experiment configuration, as `key = value` pairs.
    pub effective_config: BTreeMap<String, String>,
    pub notes: Vec<String>,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| crate::Error::from(e).context(path.display()))
    }
}

/// Hex SHA-256 of the model and training configuration.
pub fn fingerprint(model: &ModelConfig, train: &TrainConfig) -> String {
    let json = serde_json::to_string(&(model, train)).expect("configs serialize");
    let digest = Sha256::digest(json.as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

pub const SUMMARY_HEADER: [&str; 8] = ["config_hash", "dataset", "lookback", "horizon", "seed", "mse", "mae", "seconds"];

/// Append one row to the run summary CSV, writing the header for a new file.
pub fn append_summary(path: &Path, report: &RunReport) -> Result<()> {
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| crate::Error::from(e).context(path.display()))?;
    let mut w = csv::Writer::from_writer(file);
    if fresh {
        w.write_record(SUMMARY_HEADER)?;
    }
    w.write_record([
        report.fingerprint.clone(),
        report.dataset.clone(),
        report.lookback.to_string(),
        report.horizon.to_string(),
        report.seed.to_string(),
        report.test_mse.to_string(),
        report.test_mae.to_string(),
        format!("{:.3}", report.seconds),
    ])?;
    w.flush()?;
    Ok(())
}
