use rand::Rng;

use super::{init, Module};
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// `softmax(Q·Kᵀ / √d_k)`, one row of weights per query.
pub fn attention_weights<'t>(q: &Var<'t>, k: &Var<'t>) -> Result<Var<'t>> {
    if q.shape().len() != 2 || k.shape().len() != 2 || q.shape()[1] != k.shape()[1] {
        return Err(Error::dim("attention", q.shape(), k.shape()));
    }
    let d_k = q.shape()[1] as f64;
    q.matmul(&k.transpose()?)?
        .scale(1.0 / d_k.sqrt())
        .softmax(1)
}

/// Scaled dot-product attention over T_q×d_k queries and T_k×d_k keys.
pub fn attention<'t>(q: &Var<'t>, k: &Var<'t>, v: &Var<'t>) -> Result<Var<'t>> {
    if v.shape().len() != 2 || k.shape().first() != v.shape().first() {
        return Err(Error::dim("attention", k.shape(), v.shape()));
    }
    attention_weights(q, k)?.matmul(v)
}

#[derive(Clone, Debug)]
pub struct AttentionHead {
    pub query: Tensor,
    pub key: Tensor,
    pub value: Tensor,
}

/// Self-attention with `h` heads of width d_model / h and an output projection.
#[derive(Clone, Debug)]
pub struct MultiHeadAttention {
    pub heads: Vec<AttentionHead>,
    /// (h·d_v) × d_model.
    pub output: Tensor,
}

impl MultiHeadAttention {
    pub fn new<R: Rng + ?Sized>(d_model: usize, h: usize, rng: &mut R) -> Result<Self> {
        if h == 0 || d_model % h != 0 {
            return Err(Error::Config(format!(
                "d_model {d_model} is not divisible by {h} heads"
            )));
        }
        let d_k = d_model / h;
        let heads = (0..h)
            .map(|_| AttentionHead {
                query: init::xavier(&[d_model, d_k], d_model, d_k, rng),
                key: init::xavier(&[d_model, d_k], d_model, d_k, rng),
                value: init::xavier(&[d_model, d_k], d_model, d_k, rng),
            })
            .collect();
        let output = init::xavier(&[h * d_k, d_model], h * d_k, d_model, rng);
        Ok(MultiHeadAttention { heads, output })
    }

    pub fn from_parts(heads: Vec<AttentionHead>, output: Tensor) -> Result<Self> {
        let d_model = output.shape().get(1).copied().unwrap_or(0);
        let h = heads.len();
        if h == 0 || d_model % h != 0 {
            return Err(Error::Config(format!(
                "d_model {d_model} is not divisible by {h} heads"
            )));
        }
        let d_k = d_model / h;
        for head in &heads {
            for w in [&head.query, &head.key, &head.value] {
                if w.shape() != [d_model, d_k] {
                    return Err(Error::dim("multi_head", w.shape(), &[d_model, d_k]));
                }
            }
        }
        if output.shape() != [h * d_k, d_model] {
            return Err(Error::dim("multi_head", output.shape(), &[h * d_k, d_model]));
        }
        Ok(MultiHeadAttention { heads, output })
    }

    pub fn d_model(&self) -> usize {
        self.output.shape()[1]
    }

    pub fn num_heads(&self) -> usize {
        self.heads.len()
    }

    pub fn forward<'t>(&self, tape: &'t Tape, x: &Var<'t>) -> Result<Var<'t>> {
        if x.shape().len() != 2 || x.shape()[1] != self.d_model() {
            return Err(Error::dim("multi_head", x.shape(), &[self.d_model()]));
        }
        let mut outs = Vec::with_capacity(self.heads.len());
        for head in &self.heads {
            let q = x.matmul(&tape.param(&head.query))?;
            let k = x.matmul(&tape.param(&head.key))?;
            let v = x.matmul(&tape.param(&head.value))?;
            outs.push(attention(&q, &k, &v)?);
        }
        Var::concat(&outs, 1)?.matmul(&tape.param(&self.output))
    }
}

impl Module for MultiHeadAttention {
    fn params(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (i, h) in self.heads.iter().enumerate() {
            out.push((format!("head{i}.query"), &h.query));
            out.push((format!("head{i}.key"), &h.key));
            out.push((format!("head{i}.value"), &h.value));
        }
        out.push(("output".into(), &self.output));
        out
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = Vec::new();
        for (i, h) in self.heads.iter_mut().enumerate() {
            out.push((format!("head{i}.query"), &mut h.query));
            out.push((format!("head{i}.key"), &mut h.key));
            out.push((format!("head{i}.value"), &mut h.value));
        }
        out.push(("output".into(), &mut self.output));
        out
    }
}
