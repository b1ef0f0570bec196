//! Multimodal video thumbnail selection.
//!
//! The pipeline samples frames, keeps the most aesthetic ones with a
//! double-column CNN ([`filter`]), encodes frame and audio sequences with
//! transformer encoders, recalibrates every modality with context gates,
//! and maps the fused vector to a latent target whose nearest frame (by
//! MSE) is the thumbnail ([`fusion`]). [`eval`] scores selections by
//! Precision@θ.

pub mod autodiff;
pub mod cli;
pub mod error;
pub mod eval;
pub mod tensor;

pub mod data_io;
pub mod filter;
pub mod fusion;
pub mod nn;
pub mod training;

pub use autodiff::{Gradients, Tape, Var};
pub use error::{Error, Result};
pub use tensor::Tensor;
