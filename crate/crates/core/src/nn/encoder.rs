use rand::Rng;

use super::{init, prefixed, Activation, DenseLayer, Module, MultiHeadAttention};
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const LAYER_NORM_EPS: f64 = 1e-6;

/// Sinusoidal position table: `PE[t, 2i] = sin(t / 10000^(2i/d))`, `PE[t, 2i+1] = cos(..)`.
pub fn positional_encoding(len: usize, d_model: usize) -> Tensor {
    assert!(len >= 1 && d_model >= 1);
    let mut pe = vec![0.0; len * d_model];
    for t in 0..len {
        for j in 0..d_model {
            let pair = (j / 2) * 2;
            let angle = t as f64 / 10000f64.powf(pair as f64 / d_model as f64);
            pe[t * d_model + j] = if j % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    Tensor::raw(vec![len, d_model], pe)
}

/// Post-norm transformer encoder block:
/// `x1 = LN(x + MHA(x))`, `out = LN(x1 + FFN(x1))`.
#[derive(Clone, Debug)]
pub struct EncoderBlock {
    pub attention: MultiHeadAttention,
    pub norm1_gain: Tensor,
    pub norm1_bias: Tensor,
    pub ffn_inner: DenseLayer,
    pub ffn_outer: DenseLayer,
    pub norm2_gain: Tensor,
    pub norm2_bias: Tensor,
}

impl EncoderBlock {
    pub fn new<R: Rng + ?Sized>(d_model: usize, heads: usize, d_ff: usize, rng: &mut R) -> Result<Self> {
        Ok(EncoderBlock {
            attention: MultiHeadAttention::new(d_model, heads, rng)?,
            norm1_gain: init::ones(&[d_model]),
            norm1_bias: init::zeros(&[d_model]),
            ffn_inner: DenseLayer::new(d_model, d_ff, Activation::Relu, rng),
            ffn_outer: DenseLayer::new(d_ff, d_model, Activation::None, rng),
            norm2_gain: init::ones(&[d_model]),
            norm2_bias: init::zeros(&[d_model]),
        })
    }

    pub fn d_model(&self) -> usize {
        self.attention.d_model()
    }

    pub fn forward<'t>(&self, tape: &'t Tape, x: &Var<'t>) -> Result<Var<'t>> {
        let attended = self.attention.forward(tape, x)?;
        let x1 = x.add(&attended)?.layer_norm(
            &tape.param(&self.norm1_gain),
            &tape.param(&self.norm1_bias),
            LAYER_NORM_EPS,
        )?;
        let ff = self
            .ffn_outer
            .forward(tape, &self.ffn_inner.forward(tape, &x1)?)?;
        x1.add(&ff)?.layer_norm(
            &tape.param(&self.norm2_gain),
            &tape.param(&self.norm2_bias),
            LAYER_NORM_EPS,
        )
    }
}

impl Module for EncoderBlock {
    fn params(&self) -> Vec<(String, &Tensor)> {
        let mut out = prefixed("attention", self.attention.params());
        out.push(("norm1.gain".into(), &self.norm1_gain));
        out.push(("norm1.bias".into(), &self.norm1_bias));
        out.extend(prefixed("ffn_inner", self.ffn_inner.params()));
        out.extend(prefixed("ffn_outer", self.ffn_outer.params()));
        out.push(("norm2.gain".into(), &self.norm2_gain));
        out.push(("norm2.bias".into(), &self.norm2_bias));
        out
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = prefixed("attention", self.attention.params_mut());
        out.push(("norm1.gain".into(), &mut self.norm1_gain));
        out.push(("norm1.bias".into(), &mut self.norm1_bias));
        out.extend(prefixed("ffn_inner", self.ffn_inner.params_mut()));
        out.extend(prefixed("ffn_outer", self.ffn_outer.params_mut()));
        out.push(("norm2.gain".into(), &mut self.norm2_gain));
        out.push(("norm2.bias".into(), &mut self.norm2_bias));
        out
    }
}

/// A stack of encoder blocks with optional sinusoidal positions added to the input.
#[derive(Clone, Debug)]
pub struct Encoder {
    pub d_model: usize,
    pub blocks: Vec<EncoderBlock>,
    pub use_positional_encoding: bool,
}

impl Encoder {
    pub fn new<R: Rng + ?Sized>(
        d_model: usize,
        layers: usize,
        heads: usize,
        d_ff: usize,
        use_positional_encoding: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let blocks = (0..layers)
            .map(|_| EncoderBlock::new(d_model, heads, d_ff, rng))
            .collect::<Result<_>>()?;
        Ok(Encoder {
            d_model,
            blocks,
            use_positional_encoding,
        })
    }

    pub fn forward<'t>(&self, tape: &'t Tape, x: &Var<'t>) -> Result<Var<'t>> {
        if x.shape().len() != 2 || x.shape()[1] != self.d_model {
            return Err(Error::dim("encoder", x.shape(), &[self.d_model]));
        }
        if let Some(b) = self.blocks.iter().find(|b| b.d_model() != self.d_model) {
            return Err(Error::Config(format!(
                "encoder block width {} does not match d_model {}",
                b.d_model(),
                self.d_model
            )));
        }
        let mut h = if self.use_positional_encoding {
            x.add(&tape.constant(positional_encoding(x.shape()[0], self.d_model)))?
        } else {
            x.clone()
        };
        for block in &self.blocks {
            h = block.forward(tape, &h)?;
        }
        Ok(h)
    }
}

impl Module for Encoder {
    fn params(&self) -> Vec<(String, &Tensor)> {
        self.blocks
            .iter()
            .enumerate()
            .flat_map(|(i, b)| prefixed(&format!("block{i}"), b.params()))
            .collect()
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        self.blocks
            .iter_mut()
            .enumerate()
            .flat_map(|(i, b)| prefixed(&format!("block{i}"), b.params_mut()))
            .collect()
    }
}
