use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::optim::{Adam, AdamConfig, Moments};
use crate::autodiff::{Tape, Var};
use crate::data_io::checkpoint::{write_checkpoint, Checkpoint, StoredTensor};
use crate::error::{Error, Result};
use crate::nn::Module;

/// A network the epoch loop can optimise and checkpoint.
pub trait Trainable: Module + Sized {
    type Sample;
    const KIND: &'static str;

    fn sample_loss<'t>(&self, tape: &'t Tape, sample: &Self::Sample) -> Result<Var<'t>>;

    /// Rejects unusable samples before the first step.
    fn check_sample(&self, sample: &Self::Sample) -> Result<()>;

    fn config_value(&self) -> Value;

    /// Builds an untrained network from a stored configuration.
    fn from_config_value(config: &Value) -> Result<Self>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Filter,
    Fusion,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Filter => "filter",
            ModelKind::Fusion => "fusion",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelKind,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    /// Receives `last/`, `best/` and `loss_curve.csv` when set.
    pub checkpoint_dir: Option<PathBuf>,
    /// Continue from `checkpoint_dir/last` when it exists.
    pub resume: bool,
}

impl TrainConfig {
    pub fn new(model: ModelKind, epochs: usize, lr: f64, seed: u64) -> Self {
        TrainConfig {
            model,
            epochs,
            lr,
            seed,
            checkpoint_dir: None,
            resume: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct TrainState {
    epochs_done: usize,
    history: Vec<EpochRecord>,
    best_epoch: usize,
    best_val: f64,
    adam_step: u64,
    adam: AdamConfig,
    seed: u64,
}

pub struct TrainOutcome<M> {
    /// The network after the final epoch.
    pub model: M,
    pub history: Vec<EpochRecord>,
    /// Epoch (1-based) with the lowest validation loss.
    pub best_epoch: usize,
    pub best_val: f64,
}

/// What the per-epoch callback asks the loop to do next.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

/// Mean loss over `samples` on a gradient-free tape.
pub fn evaluate<M: Trainable>(model: &M, samples: &[M::Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::TrainingData("no samples to evaluate".into()));
    }
    let mut total = 0.0;
    for s in samples {
        let tape = Tape::no_grad();
        total += model.sample_loss(&tape, s)?.value().item();
        debug_assert_eq!(tape.len(), 0);
    }
    Ok(total / samples.len() as f64)
}

/// EMA smoothing for progress display.
pub fn ema(values: &[f64], alpha: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = None;
    for &v in values {
        let next = match acc {
            None => v,
            Some(a) => alpha * v + (1.0 - alpha) * a,
        };
        out.push(next);
        acc = Some(next);
    }
    out
}

/// Visit order for one epoch; a pure function of (seed, epoch).
pub fn epoch_order(seed: u64, epoch: usize, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

/// One optimisation step on one sample; returns the pre-update loss.
pub fn step<M: Trainable>(model: &mut M, sample: &M::Sample, optimizer: &mut Adam) -> Result<f64> {
    let tape = Tape::new();
    let loss = model.sample_loss(&tape, sample)?;
    let value = loss.value().item();
    let grads = tape.backward(&loss)?;
    drop(loss);
    drop(tape);
    optimizer.step(model.params_mut(), &grads)?;
    Ok(value)
}

pub fn loss_curve_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from("epoch,train_mse,val_mse\n");
    for r in history {
        let _ = writeln!(out, "{},{},{}", r.epoch, r.train_mse, r.val_mse);
    }
    out
}

fn save<M: Trainable>(dir: &Path, model: &M, optimizer: &Adam, state: &TrainState) -> Result<()> {
    let params = model.params();
    let mut tensors: Vec<StoredTensor<'_>> = params
        .iter()
        .map(|(name, t)| StoredTensor::new(name.clone(), t))
        .collect();
    for (name, t) in &params {
        if let Some(m) = optimizer.moments.get(name) {
            tensors.push(StoredTensor {
                name: format!("adam.m.{name}"),
                shape: t.shape(),
                data: &m.m,
            });
            tensors.push(StoredTensor {
                name: format!("adam.v.{name}"),
                shape: t.shape(),
                data: &m.v,
            });
        }
    }
    let state = serde_json::to_value(state).expect("train state serialises");
    write_checkpoint(dir, M::KIND, model.config_value(), state, &tensors)
}

/// Loads a network from a checkpoint directory, or from the `best/`
/// checkpoint inside a training output directory.
pub fn load_model<M: Trainable>(dir: impl AsRef<Path>) -> Result<M> {
    let dir = dir.as_ref();
    let dir = if Checkpoint::exists(dir) {
        dir.to_path_buf()
    } else {
        dir.join("best")
    };
    let mut ckpt = Checkpoint::load(&dir)?;
    ckpt.expect_kind(M::KIND)?;
    let mut model = M::from_config_value(&ckpt.config)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", dir.display())))?;
    ckpt.restore(model.params_mut())?;
    Ok(model)
}

fn resume<M: Trainable>(dir: &Path) -> Result<(M, Adam, TrainState)> {
    let mut ckpt = Checkpoint::load(dir)?;
    ckpt.expect_kind(M::KIND)?;
    let mut model = M::from_config_value(&ckpt.config)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", dir.display())))?;
    let state: TrainState = serde_json::from_value(ckpt.state.clone())
        .map_err(|e| Error::Checkpoint(format!("{}: training state: {e}", dir.display())))?;
    let mut adam = Adam::new(state.adam);
    adam.step = state.adam_step;
    let names: Vec<String> = model.params().into_iter().map(|(n, _)| n).collect();
    for name in &names {
        let m = ckpt.tensors.remove(&format!("adam.m.{name}"));
        let v = ckpt.tensors.remove(&format!("adam.v.{name}"));
        if let (Some(m), Some(v)) = (m, v) {
            adam.moments.insert(
                name.clone(),
                Moments {
                    m: m.into_vec(),
                    v: v.into_vec(),
                },
            );
        }
    }
    ckpt.restore(model.params_mut())?;
    Ok((model, adam, state))
}

pub fn run_training<M: Trainable>(
    model: M,
    train: &[M::Sample],
    val: &[M::Sample],
    config: &TrainConfig,
) -> Result<TrainOutcome<M>> {
    run_training_with(model, train, val, config, |_, _| Control::Continue)
}

/// The epoch loop: single-sample Adam steps in a seeded per-epoch order,
/// validation on a gradient-free tape, `last/` and `best/` checkpoints.
///
/// Validation uses `val`, or `train` when `val` is empty. `on_epoch` runs
/// after each epoch's checkpoints are written.
pub fn run_training_with<M: Trainable>(
    model: M,
    train: &[M::Sample],
    val: &[M::Sample],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&M, &EpochRecord) -> Control,
) -> Result<TrainOutcome<M>> {
    config.validate()?;
    if config.model.name() != M::KIND {
        return Err(Error::Config(format!(
            "training config selects {}, model is {}",
            config.model.name(),
            M::KIND
        )));
    }
    if train.is_empty() {
        return Err(Error::TrainingData("training set is empty".into()));
    }
    for s in train.iter().chain(val) {
        model.check_sample(s)?;
    }
    let val = if val.is_empty() { train } else { val };
    let adam_config = AdamConfig::with_lr(config.lr);
    let last_dir = config.checkpoint_dir.as_ref().map(|d| d.join("last"));
    let resumed = match &last_dir {
        Some(dir) if config.resume && Checkpoint::exists(dir) => Some(resume::<M>(dir)?),
        _ => None,
    };
    let (mut model, mut adam, mut state) = match resumed {
        Some((m, a, s)) => {
            if s.seed != config.seed || s.adam != adam_config {
                return Err(Error::Checkpoint(
                    "resume checkpoint was written with a different seed or learning rate".into(),
                ));
            }
            (m, a, s)
        }
        None => (
            model,
            Adam::new(adam_config),
            TrainState {
                epochs_done: 0,
                history: Vec::new(),
                best_epoch: 0,
                best_val: f64::INFINITY,
                adam_step: 0,
                adam: adam_config,
                seed: config.seed,
            },
        ),
    };
    while state.epochs_done < config.epochs {
        let epoch = state.epochs_done + 1;
        let mut total = 0.0;
        for i in epoch_order(config.seed, epoch, train.len()) {
            total += step(&mut model, &train[i], &mut adam)?;
        }
        let record = EpochRecord {
            epoch,
            train_mse: total / train.len() as f64,
            val_mse: evaluate(&model, val)?,
        };
        state.history.push(record);
        state.epochs_done = epoch;
        state.adam_step = adam.step;
        let improved = record.val_mse < state.best_val;
        if improved {
            state.best_val = record.val_mse;
            state.best_epoch = epoch;
        }
        if let Some(dir) = &config.checkpoint_dir {
            save(&dir.join("last"), &model, &adam, &state)?;
            if improved {
                save(&dir.join("best"), &model, &adam, &state)?;
            }
            let path = dir.join("loss_curve.csv");
            std::fs::write(&path, loss_curve_csv(&state.history)).map_err(|e| Error::io(&path, e))?;
        }
        if on_epoch(&model, &record) == Control::Stop {
            break;
        }
    }
    Ok(TrainOutcome {
        model,
        history: state.history,
        best_epoch: state.best_epoch,
        best_val: state.best_val,
    })
}
