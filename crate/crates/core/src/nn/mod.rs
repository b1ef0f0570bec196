//! Layers: dense, attention, transformer encoder, context gating.

mod attention;
mod dense;
mod encoder;
mod gate;
pub(crate) mod init;

pub use attention::{attention, attention_weights, AttentionHead, MultiHeadAttention};
pub use dense::{Activation, DenseLayer};
pub use encoder::{positional_encoding, Encoder, EncoderBlock, LAYER_NORM_EPS};
pub use gate::ContextGate;

use crate::autodiff::Var;
use crate::error::Result;
use crate::tensor::Tensor;

/// A container of named trainable tensors.
pub trait Module {
    fn params(&self) -> Vec<(String, &Tensor)>;
    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)>;

    fn param_count(&self) -> usize {
        self.params().iter().map(|(_, t)| t.numel()).sum()
    }
}

pub(crate) fn prefixed<'a, T>(prefix: &str, params: Vec<(String, T)>) -> Vec<(String, T)>
where
    T: 'a,
{
    params
        .into_iter()
        .map(|(name, t)| (format!("{prefix}.{name}"), t))
        .collect()
}

/// Mean over the time axis of a T×d sequence.
pub fn temporal_pool<'t>(x: &Var<'t>) -> Result<Var<'t>> {
    let rows = x.shape().first().copied().unwrap_or(0);
    x.masked_mean_rows(&vec![true; rows])
}

/// Mean over the rows flagged valid in `mask`.
pub fn masked_temporal_pool<'t>(x: &Var<'t>, mask: &[bool]) -> Result<Var<'t>> {
    x.masked_mean_rows(mask)
}
