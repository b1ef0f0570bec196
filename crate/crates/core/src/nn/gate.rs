use rand::Rng;

use super::{init, Module};
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Context gating: `σ(W·M + b) ∘ M`.
///
/// The gate lies in (0, 1), so each output keeps its input's sign and never
/// exceeds it in magnitude.
#[derive(Clone, Debug)]
pub struct ContextGate {
    /// d×d, applied as `W · M` with `M` a column vector.
    pub weight: Tensor,
    pub bias: Tensor,
}

impl ContextGate {
    pub fn new<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        ContextGate {
            weight: init::xavier(&[dim, dim], dim, dim, rng),
            bias: init::zeros(&[dim]),
        }
    }

    pub fn from_parts(weight: Tensor, bias: Tensor) -> Result<Self> {
        let d = bias.numel();
        if weight.shape() != [d, d] || bias.ndim() != 1 {
            return Err(Error::dim("context_gate", weight.shape(), bias.shape()));
        }
        Ok(ContextGate { weight, bias })
    }

    pub fn dim(&self) -> usize {
        self.bias.numel()
    }

    pub fn forward<'t>(&self, tape: &'t Tape, m: &Var<'t>) -> Result<Var<'t>> {
        let d = self.dim();
        if m.shape() != [d] {
            return Err(Error::dim("context_gate", m.shape(), &[d]));
        }
        let logits = tape
            .param(&self.weight)
            .matmul(&m.reshape(&[d, 1])?)?
            .reshape(&[d])?
            .add(&tape.param(&self.bias))?;
        logits.sigmoid().mul(m)
    }
}

impl Module for ContextGate {
    fn params(&self) -> Vec<(String, &Tensor)> {
        vec![("weight".into(), &self.weight), ("bias".into(), &self.bias)]
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        vec![
            ("weight".into(), &mut self.weight),
            ("bias".into(), &mut self.bias),
        ]
    }
}
