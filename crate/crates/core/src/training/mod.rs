//! Optimisation: Adam and the epoch loop shared by both networks.

mod optim;
mod trainer;

pub use optim::{Adam, AdamConfig, Moments};
pub use trainer::{
    ema, epoch_order, evaluate, load_model, loss_curve_csv, run_training, run_training_with, step,
    Control, EpochRecord, ModelKind, TrainConfig, TrainOutcome, Trainable,
};
