//! Central finite-difference gradient checks.
//!
//! The scalar under test is `sum(w ⊙ f(x))` with fixed random weights `w`,
//! so every output element contributes with a distinct factor. The error of
//! one tensor is `‖g − ĝ‖ / max(‖g‖ + ‖ĝ‖, FLOOR)` over the checked
//! coordinates.

use rand::Rng;
use thumbforge::filter::{make_views, FilterConfig, FilterNet};
use thumbforge::fusion::FusionNet;
use thumbforge::nn::{
    attention, Activation, ContextGate, DenseLayer, Encoder, EncoderBlock, Module, MultiHeadAttention,
};
use thumbforge::data_io::Image;
use thumbforge::{Result, Tape, Tensor, Var};

use super::{rng, tiny_bundle, tiny_fusion};

pub const STEP: f64 = 1e-5;
pub const FLOOR: f64 = 1e-6;
pub const TOLERANCE: f64 = 1e-4;
/// Coordinates checked per tensor; smaller tensors are checked in full.
pub const COORDS: usize = 12;

pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, b)| a - b).collect();
    norm(&diff) / (norm(analytic) + norm(numeric)).max(FLOOR)
}

/// No parameters; used for plain op checks.
pub struct NoParams;

impl Module for NoParams {
    fn params(&self) -> Vec<(String, &Tensor)> {
        Vec::new()
    }
    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        Vec::new()
    }
}

fn coords(n: usize, seed: u64) -> Vec<usize> {
    if n <= COORDS {
        return (0..n).collect();
    }
    let mut r = rng(seed);
    (0..COORDS).map(|_| r.gen_range(0..n)).collect()
}

/// Largest relative error over every input and every parameter of `model`.
pub fn check<M, F>(model: &mut M, inputs: &[Tensor], seed: u64, f: F) -> Result<f64>
where
    M: Module,
    F: for<'t> Fn(&M, &'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    let weights = {
        let tape = Tape::no_grad();
        let vars: Vec<Var> = inputs.iter().map(|x| tape.constant(x.clone())).collect();
        let out = f(model, &tape, &vars)?;
        Tensor::uniform(out.shape(), -1.0, 1.0, &mut rng(seed ^ 0xA5A5))
    };
    let objective = |model: &M, inputs: &[Tensor]| -> Result<f64> {
        let tape = Tape::no_grad();
        let vars: Vec<Var> = inputs.iter().map(|x| tape.constant(x.clone())).collect();
        let out = f(model, &tape, &vars)?;
        Ok(out.mul(&tape.constant(weights.clone()))?.sum().value().item())
    };

    let tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|x| tape.leaf(x.clone())).collect();
    let out = f(model, &tape, &vars)?;
    let loss = out.mul(&tape.constant(weights.clone()))?.sum();
    let grads = tape.backward(&loss)?;

    let mut worst: f64 = 0.0;
    let mut inputs = inputs.to_vec();
    for (i, var) in vars.iter().enumerate() {
        let g = grads.wrt(var).map(|t| t.into_vec()).unwrap_or_else(|| vec![0.0; inputs[i].numel()]);
        let picks = coords(g.len(), seed.wrapping_add(i as u64));
        let mut numeric = Vec::with_capacity(picks.len());
        for &j in &picks {
            let orig = inputs[i].data()[j];
            inputs[i].data_mut()[j] = orig + STEP;
            let up = objective(model, &inputs)?;
            inputs[i].data_mut()[j] = orig - STEP;
            let down = objective(model, &inputs)?;
            inputs[i].data_mut()[j] = orig;
            numeric.push((up - down) / (2.0 * STEP));
        }
        let analytic: Vec<f64> = picks.iter().map(|&j| g[j]).collect();
        worst = worst.max(relative_error(&analytic, &numeric));
    }

    let analytic_params: Vec<Vec<f64>> = model
        .params()
        .iter()
        .map(|(_, p)| grads.for_param(p).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; p.numel()]))
        .collect();
    for (k, g) in analytic_params.iter().enumerate() {
        let picks = coords(g.len(), seed.wrapping_add(1000 + k as u64));
        let mut numeric = Vec::with_capacity(picks.len());
        for &j in &picks {
            let orig = model.params()[k].1.data()[j];
            model.params_mut()[k].1.data_mut()[j] = orig + STEP;
            let up = objective(model, &inputs)?;
            model.params_mut()[k].1.data_mut()[j] = orig - STEP;
            let down = objective(model, &inputs)?;
            model.params_mut()[k].1.data_mut()[j] = orig;
            numeric.push((up - down) / (2.0 * STEP));
        }
        let analytic: Vec<f64> = picks.iter().map(|&j| g[j]).collect();
        worst = worst.max(relative_error(&analytic, &numeric));
    }
    Ok(worst)
}

fn randn(shape: &[usize], seed: u64) -> Tensor {
    Tensor::randn(shape, &mut rng(seed))
}

fn ops(seed: u64, f: impl for<'t> Fn(&NoParams, &'t Tape, &[Var<'t>]) -> Result<Var<'t>>, shapes: &[&[usize]]) -> Result<f64> {
    let inputs: Vec<Tensor> = shapes.iter().enumerate().map(|(i, s)| randn(s, seed * 31 + i as u64)).collect();
    check(&mut NoParams, &inputs, seed, f)
}

pub struct Case {
    pub name: &'static str,
    pub run: fn(u64) -> Result<f64>,
}

pub fn cases() -> Vec<Case> {
    vec![
        Case { name: "matmul", run: |s| ops(s, |_, _, x| x[0].matmul(&x[1]), &[&[3, 4], &[4, 5]]) },
        Case { name: "add", run: |s| ops(s, |_, _, x| x[0].add(&x[1]), &[&[2, 3], &[2, 3]]) },
        Case { name: "sub", run: |s| ops(s, |_, _, x| x[0].sub(&x[1]), &[&[2, 3], &[2, 3]]) },
        Case { name: "mul", run: |s| ops(s, |_, _, x| x[0].mul(&x[1]), &[&[4], &[4]]) },
        Case { name: "add_bias", run: |s| ops(s, |_, _, x| x[0].add_bias(&x[1]), &[&[3, 4], &[4]]) },
        Case { name: "scale", run: |s| ops(s, |_, _, x| Ok(x[0].scale(-1.7)), &[&[5]]) },
        Case { name: "mean", run: |s| ops(s, |_, _, x| Ok(x[0].mean()), &[&[2, 5]]) },
        Case { name: "relu", run: |s| ops(s, |_, _, x| Ok(x[0].relu()), &[&[3, 4]]) },
        Case { name: "sigmoid", run: |s| ops(s, |_, _, x| Ok(x[0].sigmoid()), &[&[3, 4]]) },
        Case { name: "softmax_rows", run: |s| ops(s, |_, _, x| x[0].softmax(1), &[&[3, 5]]) },
        Case { name: "softmax_cols", run: |s| ops(s, |_, _, x| x[0].softmax(0), &[&[3, 5]]) },
        Case { name: "transpose", run: |s| ops(s, |_, _, x| x[0].transpose(), &[&[2, 5]]) },
        Case { name: "reshape", run: |s| ops(s, |_, _, x| x[0].reshape(&[5, 2]), &[&[2, 5]]) },
        Case {
            name: "layer_norm",
            run: |s| ops(s, |_, _, x| x[0].layer_norm(&x[1], &x[2], 1e-6), &[&[3, 6], &[6], &[6]]),
        },
        Case {
            name: "concat",
            run: |s| ops(s, |_, _, x| Var::concat(&[x[0].clone(), x[1].clone()], 0), &[&[3], &[4]]),
        },
        Case { name: "narrow", run: |s| ops(s, |_, _, x| x[0].narrow(1, 1, 3), &[&[3, 5]]) },
        Case { name: "mse", run: |s| ops(s, |_, _, x| x[0].mse(&x[1]), &[&[6], &[6]]) },
        Case { name: "conv2d", run: |s| ops(s, |_, _, x| x[0].conv2d(&x[1], 1, 1), &[&[5, 6, 2], &[3, 3, 2, 3]]) },
        Case {
            name: "conv2d_stride2",
            run: |s| ops(s, |_, _, x| x[0].conv2d(&x[1], 2, 0), &[&[7, 7, 3], &[3, 3, 3, 2]]),
        },
        Case { name: "maxpool2d", run: |s| ops(s, |_, _, x| x[0].maxpool2d(2, 2), &[&[6, 4, 3]]) },
        Case { name: "global_maxpool", run: |s| ops(s, |_, _, x| x[0].global_maxpool(), &[&[4, 3, 2]]) },
        Case { name: "global_avgpool", run: |s| ops(s, |_, _, x| x[0].global_avgpool(), &[&[4, 3, 2]]) },
        Case {
            name: "masked_mean_rows",
            run: |s| ops(s, |_, _, x| x[0].masked_mean_rows(&[true, false, true, true]), &[&[4, 3]]),
        },
        Case {
            name: "attention",
            run: |s| ops(s, |_, _, x| attention(&x[0], &x[1], &x[2]), &[&[4, 3], &[5, 3], &[5, 2]]),
        },
        Case {
            name: "dense_relu",
            run: |s| {
                let mut layer = DenseLayer::new(5, 4, Activation::Relu, &mut rng(s));
                layer.bias = randn(&[4], s + 1).requires_grad();
                check(&mut layer, &[randn(&[3, 5], s + 2)], s, |m, t, x| m.forward(t, &x[0]))
            },
        },
        Case {
            name: "dense_vector",
            run: |s| {
                let mut layer = DenseLayer::new(6, 3, Activation::None, &mut rng(s));
                check(&mut layer, &[randn(&[6], s + 2)], s, |m, t, x| m.forward(t, &x[0]))
            },
        },
        Case {
            name: "multi_head",
            run: |s| {
                let mut mha = MultiHeadAttention::new(8, 2, &mut rng(s)).unwrap();
                check(&mut mha, &[randn(&[5, 8], s + 2)], s, |m, t, x| m.forward(t, &x[0]))
            },
        },
        Case {
            name: "encoder_block",
            run: |s| {
                let mut block = EncoderBlock::new(8, 2, 6, &mut rng(s)).unwrap();
                check(&mut block, &[randn(&[4, 8], s + 2)], s, |m, t, x| m.forward(t, &x[0]))
            },
        },
        Case {
            name: "encoder",
            run: |s| {
                let mut enc = Encoder::new(6, 2, 3, 5, true, &mut rng(s)).unwrap();
                check(&mut enc, &[randn(&[4, 6], s + 2)], s, |m, t, x| m.forward(t, &x[0]))
            },
        },
        Case {
            name: "context_gate",
            run: |s| {
                let mut gate = ContextGate::new(7, &mut rng(s));
                gate.bias = randn(&[7], s + 1).requires_grad();
                check(&mut gate, &[randn(&[7], s + 2)], s, |m, t, x| m.forward(t, &x[0]))
            },
        },
        Case {
            name: "filter_net",
            run: |s| {
                let config = FilterConfig { view_size: 8, channels: vec![3, 4], column_dim: 5, seed: s, crop_seed: s };
                let mut net = FilterNet::new(config).unwrap();
                // Nonzero biases and random pixels keep relu inputs off zero
                // and max-pool windows free of exact ties.
                let mut r = rng(s ^ 0xB1A5);
                for (name, p) in net.params_mut() {
                    if name.ends_with("bias") {
                        p.data_mut().iter_mut().for_each(|b| *b = r.gen_range(-0.2..0.2));
                    }
                }
                net.set_head_bias(0.3);
                let pixels = Tensor::uniform(&[10 * 12 * 3], 0.0, 1.0, &mut rng(s ^ 0x5EED));
                let frame = Image::new(10, 12, pixels.into_vec()).unwrap();
                let views = make_views(&frame, 8, s).unwrap();
                check(&mut net, &[], s, move |m, t, _| m.score_var(t, &views))
            },
        },
        Case {
            name: "fusion_forward",
            run: |s| {
                let mut net = FusionNet::new(tiny_fusion(s)).unwrap();
                let bundle = tiny_bundle(s, 4, 3);
                check(&mut net, &[], s, move |m, t, _| m.forward(t, &bundle))
            },
        },
    ]
}
