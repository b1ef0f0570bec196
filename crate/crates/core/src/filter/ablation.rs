use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::net::{AestheticSample, FilterConfig, FilterNet};
use crate::error::{Error, Result};
use crate::training::{run_training, ModelKind, TrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub depth: usize,
    /// Validation MSE after each epoch.
    pub val_mse: Vec<f64>,
    pub train_mse: Vec<f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    /// MSE of predicting the validation-label mean: the label variance.
    pub baseline_mse: f64,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    /// Per-epoch validation loss by depth, one column per epoch.
    pub fn to_text(&self) -> String {
        let epochs = self.rows.iter().map(|r| r.val_mse.len()).max().unwrap_or(0);
        let mut out = String::from("depth");
        for e in 1..=epochs {
            let _ = write!(out, " {:>9}", format!("epoch{e}"));
        }
        out.push_str("   seconds\n");
        for row in &self.rows {
            let _ = write!(out, "{:>5}", row.depth);
            for v in &row.val_mse {
                let _ = write!(out, " {v:>9.4}");
            }
            let _ = writeln!(out, " {:>9.2}", row.seconds);
        }
        let _ = writeln!(out, "baseline (label variance): {:.4}", self.baseline_mse);
        out
    }

    /// Trajectories without timings, for determinism comparisons.
    pub fn trajectories(&self) -> Vec<(usize, Vec<f64>)> {
        self.rows.iter().map(|r| (r.depth, r.val_mse.clone())).collect()
    }
}

pub fn label_variance(samples: &[AestheticSample]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().map(|s| s.label).sum::<f64>() / n;
    samples.iter().map(|s| (s.label - mean).powi(2)).sum::<f64>() / n
}

/// Trains one network per depth for `epochs` epochs and records the
/// validation trajectory. Each network starts with its head bias at the
/// training-label mean.
pub fn ablate_depth(
    train: &[AestheticSample],
    val: &[AestheticSample],
    depths: &[usize],
    epochs: usize,
    base: &FilterConfig,
    lr: f64,
) -> Result<AblationReport> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::TrainingData("ablation needs non-empty train and validation sets".into()));
    }
    let label_mean = train.iter().map(|s| s.label).sum::<f64>() / train.len() as f64;
    let mut rows = Vec::with_capacity(depths.len());
    for &depth in depths {
        let config = FilterConfig {
            channels: FilterConfig::with_depth(depth).channels,
            ..base.clone()
        };
        let mut net = FilterNet::new(config)?;
        net.set_head_bias(label_mean);
        let started = Instant::now();
        let outcome = run_training(net, train, val, &TrainConfig::new(ModelKind::Filter, epochs, lr, base.seed))?;
        rows.push(AblationRow {
            depth,
            val_mse: outcome.history.iter().map(|r| r.val_mse).collect(),
            train_mse: outcome.history.iter().map(|r| r.train_mse).collect(),
            seconds: started.elapsed().as_secs_f64(),
        });
    }
    Ok(AblationReport {
        baseline_mse: label_variance(val),
        rows,
    })
}
