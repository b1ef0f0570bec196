use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::frames::{top_k_indices, FrameSequence};
use super::views::{make_views, ViewPair};
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::nn::{init, prefixed, Activation, DenseLayer, Module};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    /// Side S of both square views.
    pub view_size: usize,
    /// Output channels of each 3×3 conv block; every block but the last is
    /// followed by a 2×2 max pool.
    pub channels: Vec<usize>,
    /// Width of each column's output.
    pub column_dim: usize,
    pub seed: u64,
    /// Base seed of the local crop offsets.
    pub crop_seed: u64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig::with_depth(2)
    }
}

impl FilterConfig {
    /// `depth` conv blocks: 16 channels, then 32 for every further block.
    pub fn with_depth(depth: usize) -> Self {
        FilterConfig {
            view_size: 32,
            channels: (0..depth).map(|i| if i == 0 { 16 } else { 32 }).collect(),
            column_dim: 64,
            seed: 0,
            crop_seed: 0,
        }
    }

    pub fn depth(&self) -> usize {
        self.channels.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.is_empty() || self.channels.contains(&0) || self.column_dim == 0 {
            return Err(Error::Config("filter needs at least one non-empty conv block".into()));
        }
        let mut side = self.view_size;
        for _ in 1..self.depth() {
            side /= 2;
        }
        if side == 0 {
            return Err(Error::Config(format!(
                "view size {} is too small for {} blocks",
                self.view_size,
                self.depth()
            )));
        }
        Ok(())
    }

    /// Crop seed for the frame with source index `index`.
    pub fn crop_seed_for(&self, index: usize) -> u64 {
        self.crop_seed.wrapping_add(index as u64)
    }
}

/// 3×3 convolution, stride 1, padding 1, relu, optional 2×2 max pool.
#[derive(Clone, Debug)]
pub struct ConvBlock {
    pub kernel: Tensor,
    pub bias: Tensor,
    pub pool: bool,
}

impl ConvBlock {
    fn new<R: Rng + ?Sized>(c_in: usize, c_out: usize, pool: bool, rng: &mut R) -> Self {
        ConvBlock {
            kernel: init::xavier(&[3, 3, c_in, c_out], 9 * c_in, 9 * c_out, rng),
            bias: init::zeros(&[c_out]),
            pool,
        }
    }

    fn forward<'t>(&self, tape: &'t Tape, x: &Var<'t>) -> Result<Var<'t>> {
        let y = x
            .conv2d(&tape.param(&self.kernel), 1, 1)?
            .add_bias(&tape.param(&self.bias))?
            .relu();
        if self.pool {
            y.maxpool2d(2, 2)
        } else {
            Ok(y)
        }
    }
}

impl Module for ConvBlock {
    fn params(&self) -> Vec<(String, &Tensor)> {
        vec![("kernel".into(), &self.kernel), ("bias".into(), &self.bias)]
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        vec![
            ("kernel".into(), &mut self.kernel),
            ("bias".into(), &mut self.bias),
        ]
    }
}

/// Conv blocks, global average pool, dense projection with relu.
#[derive(Clone, Debug)]
pub struct Column {
    pub blocks: Vec<ConvBlock>,
    pub projection: DenseLayer,
}

impl Column {
    fn new<R: Rng + ?Sized>(config: &FilterConfig, rng: &mut R) -> Self {
        let depth = config.depth();
        let mut c_in = 3;
        let mut blocks = Vec::with_capacity(depth);
        for (i, &c) in config.channels.iter().enumerate() {
            blocks.push(ConvBlock::new(c_in, c, i + 1 < depth, rng));
            c_in = c;
        }
        Column {
            blocks,
            projection: DenseLayer::new(c_in, config.column_dim, Activation::Relu, rng),
        }
    }

    pub fn forward<'t>(&self, tape: &'t Tape, x: &Var<'t>) -> Result<Var<'t>> {
        let mut h = x.clone();
        for block in &self.blocks {
            h = block.forward(tape, &h)?;
        }
        self.projection.forward(tape, &h.global_avgpool()?)
    }
}

impl Module for Column {
    fn params(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<_> = self
            .blocks
            .iter()
            .enumerate()
            .flat_map(|(i, b)| prefixed(&format!("block{i}"), b.params()))
            .collect();
        out.extend(prefixed("projection", self.projection.params()));
        out
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out: Vec<_> = self
            .blocks
            .iter_mut()
            .enumerate()
            .flat_map(|(i, b)| prefixed(&format!("block{i}"), b.params_mut()))
            .collect();
        out.extend(prefixed("projection", self.projection.params_mut()));
        out
    }
}

/// Double-column aesthetic scorer: a global-view column and a local-view
/// column, concatenated and mapped to one score.
#[derive(Clone, Debug)]
pub struct FilterNet {
    pub config: FilterConfig,
    pub global: Column,
    pub local: Column,
    pub head: DenseLayer,
}

impl FilterNet {
    pub fn new(config: FilterConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let global = Column::new(&config, &mut rng);
        let local = Column::new(&config, &mut rng);
        let head = DenseLayer::new(2 * config.column_dim, 1, Activation::None, &mut rng);
        Ok(FilterNet {
            config,
            global,
            local,
            head,
        })
    }

    /// Starts the score at `value` for every input, e.g. the label mean.
    pub fn set_head_bias(&mut self, value: f64) {
        self.head.bias.data_mut()[0] = value;
    }

    /// The 2·column_dim representation `r`.
    pub fn representation<'t>(&self, tape: &'t Tape, views: &ViewPair) -> Result<Var<'t>> {
        let s = self.config.view_size;
        for t in [&views.global, &views.local] {
            if t.shape() != [s, s, 3] {
                return Err(Error::dim("dcnn_score", t.shape(), &[s, s, 3]));
            }
        }
        let g = self.global.forward(tape, &tape.constant(views.global.clone()))?;
        let l = self.local.forward(tape, &tape.constant(views.local.clone()))?;
        Var::concat(&[g, l], 0)
    }

    /// Score as a 1-element var.
    pub fn score_var<'t>(&self, tape: &'t Tape, views: &ViewPair) -> Result<Var<'t>> {
        let r = self.representation(tape, views)?;
        self.head.forward(tape, &r)
    }

    pub fn views(&self, frame: &crate::data_io::Image, index: usize) -> Result<ViewPair> {
        make_views(frame, self.config.view_size, self.config.crop_seed_for(index))
    }
}

pub fn dcnn_score(views: &ViewPair, net: &FilterNet) -> Result<f64> {
    let tape = Tape::no_grad();
    Ok(net.score_var(&tape, views)?.value().data()[0])
}

/// Scores every frame; work is spread over the current rayon pool and
/// results come back in sequence order.
pub fn score_frames(seq: &FrameSequence, net: &FilterNet) -> Result<Vec<f64>> {
    let jobs: Vec<(usize, &crate::data_io::Image)> = seq.iter().collect();
    jobs.par_iter()
        .map(|&(index, frame)| dcnn_score(&net.views(frame, index)?, net))
        .collect()
}

/// The `k` best-scoring frames in temporal order.
pub fn top_k_frames(seq: &FrameSequence, net: &FilterNet, k: usize) -> Result<FrameSequence> {
    if k == 0 {
        return Err(Error::Usage("top-k needs k ≥ 1".into()));
    }
    if seq.len() <= k {
        return Ok(seq.clone());
    }
    let scores = score_frames(seq, net)?;
    Ok(seq.subset(&top_k_indices(&scores, k)))
}

impl Module for FilterNet {
    fn params(&self) -> Vec<(String, &Tensor)> {
        let mut out = prefixed("global", self.global.params());
        out.extend(prefixed("local", self.local.params()));
        out.extend(prefixed("head", self.head.params()));
        out
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = prefixed("global", self.global.params_mut());
        out.extend(prefixed("local", self.local.params_mut()));
        out.extend(prefixed("head", self.head.params_mut()));
        out
    }
}

/// One training example: both views and the weighted-mean label.
#[derive(Clone, Debug)]
pub struct AestheticSample {
    pub views: ViewPair,
    pub label: f64,
}

impl crate::training::Trainable for FilterNet {
    type Sample = AestheticSample;
    const KIND: &'static str = "filter";

    fn sample_loss<'t>(&self, tape: &'t Tape, sample: &AestheticSample) -> Result<Var<'t>> {
        let score = self.score_var(tape, &sample.views)?;
        score.mse(&tape.constant(Tensor::vector(vec![sample.label])))
    }

    fn check_sample(&self, sample: &AestheticSample) -> Result<()> {
        let s = self.config.view_size;
        if sample.views.global.shape() != [s, s, 3] || sample.views.local.shape() != [s, s, 3] {
            return Err(Error::TrainingData(format!(
                "sample views are {:?}, network expects {s}×{s}×3",
                sample.views.global.shape()
            )));
        }
        if !sample.label.is_finite() {
            return Err(Error::TrainingData("non-finite label".into()));
        }
        Ok(())
    }

    fn config_value(&self) -> serde_json::Value {
        serde_json::to_value(&self.config).expect("filter config serialises")
    }

    fn from_config_value(config: &serde_json::Value) -> Result<Self> {
        let config: FilterConfig = serde_json::from_value(config.clone())
            .map_err(|e| Error::Config(format!("filter config: {e}")))?;
        FilterNet::new(config)
    }
}
