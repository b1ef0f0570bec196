use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{init, Module};
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    None,
}

/// `activation(x · W + b)` with `W` stored d_in×d_out.
#[derive(Clone, Debug)]
pub struct DenseLayer {
    pub weight: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new<R: Rng + ?Sized>(
        d_in: usize,
        d_out: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        DenseLayer {
            weight: init::xavier(&[d_in, d_out], d_in, d_out, rng),
            bias: init::zeros(&[d_out]),
            activation,
        }
    }

    pub fn from_parts(weight: Tensor, bias: Tensor, activation: Activation) -> Result<Self> {
        if weight.ndim() != 2 || bias.shape() != [weight.shape()[1]] {
            return Err(Error::dim("dense", weight.shape(), bias.shape()));
        }
        Ok(DenseLayer {
            weight,
            bias,
            activation,
        })
    }

    pub fn d_in(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn d_out(&self) -> usize {
        self.weight.shape()[1]
    }

    /// Accepts an n×d_in batch or a single d_in vector.
    pub fn forward<'t>(&self, tape: &'t Tape, x: &Var<'t>) -> Result<Var<'t>> {
        let vector = x.shape().len() == 1;
        let x2 = if vector {
            x.reshape(&[1, x.shape()[0]])?
        } else {
            x.clone()
        };
        if x2.shape().len() != 2 || x2.shape()[1] != self.d_in() {
            return Err(Error::dim("dense", x.shape(), self.weight.shape()));
        }
        let w = tape.param(&self.weight);
        let b = tape.param(&self.bias);
        let y = x2.matmul(&w)?.add_bias(&b)?;
        let y = match self.activation {
            Activation::Relu => y.relu(),
            Activation::Sigmoid => y.sigmoid(),
            Activation::None => y,
        };
        if vector {
            y.reshape(&[self.d_out()])
        } else {
            Ok(y)
        }
    }
}

impl Module for DenseLayer {
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
