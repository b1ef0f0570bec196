//! The fusion network and latent-space thumbnail selection.
//!
//! Frame and audio sequences each pass through a transformer encoder and are
//! mean-pooled over time. Every modality vector is recalibrated by its own
//! context gate, the four are concatenated, gated once more as a whole, and a
//! three-layer head maps the result to a latent vector `o` with the width of
//! a frame feature. The thumbnail is the candidate frame row nearest to `o`
//! in MSE.

mod select;

pub use select::{select_thumbnail, SelectionResult};
pub(crate) use select::row_mse;

pub use crate::data_io::bundle::{FeatureBundle, FeatureDims};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::nn::{prefixed, Activation, ContextGate, DenseLayer, Encoder, Module};
use crate::tensor::Tensor;
use crate::training::Adam;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub dims: FeatureDims,
    pub heads: usize,
    pub layers: usize,
    pub d_ff: usize,
    /// Width of the two hidden head layers.
    pub hidden: usize,
    /// Longer frame sequences are truncated to this many rows.
    pub max_frames: usize,
    pub max_audio: usize,
    pub positional_encoding: bool,
    /// Zero-pad short sequences to `max_*` and pool over the valid rows only.
    /// Off by default: padded rows would take part in unmasked attention.
    pub pad_to_fixed: bool,
    pub seed: u64,
}

impl FusionConfig {
    /// Full-size network: 512/2048/768 inputs, h = 8, N = 2, d_ff = 128,
    /// 512-wide head, 1000 frames and 300 audio windows.
    pub fn full() -> Self {
        FusionConfig {
            dims: FeatureDims::FULL,
            heads: 8,
            layers: 2,
            d_ff: 128,
            hidden: 512,
            max_frames: 1000,
            max_audio: 300,
            positional_encoding: true,
            pad_to_fixed: false,
            seed: 0,
        }
    }

    /// A narrow network with the same topology for fast CPU runs.
    pub fn small() -> Self {
        FusionConfig {
            dims: FeatureDims {
                frame: 32,
                audio: 64,
                text: 24,
            },
            heads: 4,
            layers: 2,
            d_ff: 32,
            hidden: 32,
            ..Self::full()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let FeatureDims { frame, audio, text } = self.dims;
        if frame == 0 || audio == 0 || text == 0 || self.hidden == 0 || self.d_ff == 0 {
            return Err(Error::Config("fusion widths must be positive".into()));
        }
        if self.heads == 0 || frame % self.heads != 0 || audio % self.heads != 0 {
            return Err(Error::Config(format!(
                "{} heads do not divide frame width {frame} and audio width {audio}",
                self.heads
            )));
        }
        if self.max_frames == 0 || self.max_audio == 0 {
            return Err(Error::Config("maximum sequence lengths must be positive".into()));
        }
        Ok(())
    }
}

/// Zero-pads or truncates the tail of a T×d matrix to `target` rows and
/// returns the mask of rows holding real data.
pub fn pad_or_truncate(x: &Tensor, target: usize) -> Result<(Tensor, Vec<bool>)> {
    if x.ndim() != 2 || target == 0 {
        return Err(Error::dim("pad_or_truncate", x.shape(), &[target]));
    }
    let (t, d) = (x.shape()[0], x.shape()[1]);
    let keep = t.min(target);
    let mut data = x.data()[..keep * d].to_vec();
    data.resize(target * d, 0.0);
    let mask = (0..target).map(|i| i < keep).collect();
    Ok((Tensor::new(&[target, d], data)?, mask))
}

fn truncate(x: &Tensor, max: usize) -> Tensor {
    if x.shape()[0] <= max {
        x.clone()
    } else {
        x.rows(&(0..max).collect::<Vec<_>>())
    }
}

/// Intermediate values of one forward pass.
pub struct FusionTrace<'t> {
    /// Gated frame, audio, title and description vectors, in that order.
    pub modalities: [Var<'t>; 4],
    /// Concatenation of the gated modality vectors.
    pub concat: Var<'t>,
    /// The concatenation after the global gate.
    pub fused: Var<'t>,
    pub output: Var<'t>,
}

impl FusionTrace<'_> {
    pub fn concat_width(&self) -> usize {
        self.concat.value().numel()
    }
}

#[derive(Clone, Debug)]
pub struct FusionNet {
    pub config: FusionConfig,
    pub frame_encoder: Encoder,
    pub audio_encoder: Encoder,
    pub frame_gate: ContextGate,
    pub audio_gate: ContextGate,
    pub title_gate: ContextGate,
    pub description_gate: ContextGate,
    pub global_gate: ContextGate,
    pub head: [DenseLayer; 3],
}

impl FusionNet {
    pub fn new(config: FusionConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let FeatureDims { frame, audio, text } = config.dims;
        let c = &config;
        let frame_encoder = Encoder::new(frame, c.layers, c.heads, c.d_ff, c.positional_encoding, &mut rng)?;
        let audio_encoder = Encoder::new(audio, c.layers, c.heads, c.d_ff, c.positional_encoding, &mut rng)?;
        let frame_gate = ContextGate::new(frame, &mut rng);
        let audio_gate = ContextGate::new(audio, &mut rng);
        let title_gate = ContextGate::new(text, &mut rng);
        let description_gate = ContextGate::new(text, &mut rng);
        let width = config.dims.concat_width();
        let global_gate = ContextGate::new(width, &mut rng);
        let head = [
            DenseLayer::new(width, c.hidden, Activation::Relu, &mut rng),
            DenseLayer::new(c.hidden, c.hidden, Activation::Relu, &mut rng),
            DenseLayer::new(c.hidden, frame, Activation::None, &mut rng),
        ];
        Ok(FusionNet {
            config,
            frame_encoder,
            audio_encoder,
            frame_gate,
            audio_gate,
            title_gate,
            description_gate,
            global_gate,
            head,
        })
    }

    pub fn dims(&self) -> FeatureDims {
        self.config.dims
    }

    fn encode_sequence<'t>(
        &self,
        tape: &'t Tape,
        encoder: &Encoder,
        x: &Tensor,
        max: usize,
    ) -> Result<Var<'t>> {
        let (x, mask) = if self.config.pad_to_fixed {
            pad_or_truncate(x, max)?
        } else {
            let x = truncate(x, max);
            let rows = x.shape()[0];
            (x, vec![true; rows])
        };
        let h = encoder.forward(tape, &tape.constant(x))?;
        h.masked_mean_rows(&mask)
    }

    pub fn forward_detailed<'t>(&self, tape: &'t Tape, bundle: &FeatureBundle) -> Result<FusionTrace<'t>> {
        bundle.validate(&self.config.dims)?;
        let frame = self.encode_sequence(tape, &self.frame_encoder, &bundle.frames, self.config.max_frames)?;
        let audio = self.encode_sequence(tape, &self.audio_encoder, &bundle.audio, self.config.max_audio)?;
        let modalities = [
            self.frame_gate.forward(tape, &frame)?,
            self.audio_gate.forward(tape, &audio)?,
            self.title_gate.forward(tape, &tape.constant(bundle.title.clone()))?,
            self.description_gate
                .forward(tape, &tape.constant(bundle.description.clone()))?,
        ];
        let concat = Var::concat(&modalities, 0)?;
        let fused = self.global_gate.forward(tape, &concat)?;
        let mut h = fused.clone();
        for layer in &self.head {
            h = layer.forward(tape, &h)?;
        }
        Ok(FusionTrace {
            modalities,
            concat,
            fused,
            output: h,
        })
    }

    /// The latent vector `o` for one video.
    pub fn forward<'t>(&self, tape: &'t Tape, bundle: &FeatureBundle) -> Result<Var<'t>> {
        Ok(self.forward_detailed(tape, bundle)?.output)
    }

    /// Inference without recording gradients.
    pub fn predict(&self, bundle: &FeatureBundle) -> Result<Tensor> {
        let tape = Tape::no_grad();
        Ok(self.forward(&tape, bundle)?.value().clone())
    }

    /// `MSE(o, F[ground_truth])`.
    pub fn loss<'t>(&self, tape: &'t Tape, bundle: &FeatureBundle) -> Result<Var<'t>> {
        let target = bundle.target()?;
        let o = self.forward(tape, bundle)?;
        o.mse(&tape.constant(target))
    }

    /// Predicts `o` and picks the nearest frame row.
    pub fn select(&self, bundle: &FeatureBundle) -> Result<SelectionResult> {
        let o = self.predict(bundle)?;
        select_thumbnail(&o, &bundle.frames, &bundle.frame_ids)
    }
}

/// One optimisation step on a single video; returns the pre-update loss.
pub fn train_step(net: &mut FusionNet, bundle: &FeatureBundle, optimizer: &mut Adam) -> Result<f64> {
    crate::training::step(net, bundle, optimizer)
}

impl Module for FusionNet {
    fn params(&self) -> Vec<(String, &Tensor)> {
        let mut out = prefixed("frame_encoder", self.frame_encoder.params());
        out.extend(prefixed("audio_encoder", self.audio_encoder.params()));
        out.extend(prefixed("frame_gate", self.frame_gate.params()));
        out.extend(prefixed("audio_gate", self.audio_gate.params()));
        out.extend(prefixed("title_gate", self.title_gate.params()));
        out.extend(prefixed("description_gate", self.description_gate.params()));
        out.extend(prefixed("global_gate", self.global_gate.params()));
        for (i, layer) in self.head.iter().enumerate() {
            out.extend(prefixed(&format!("head{i}"), layer.params()));
        }
        out
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = prefixed("frame_encoder", self.frame_encoder.params_mut());
        out.extend(prefixed("audio_encoder", self.audio_encoder.params_mut()));
        out.extend(prefixed("frame_gate", self.frame_gate.params_mut()));
        out.extend(prefixed("audio_gate", self.audio_gate.params_mut()));
        out.extend(prefixed("title_gate", self.title_gate.params_mut()));
        out.extend(prefixed("description_gate", self.description_gate.params_mut()));
        out.extend(prefixed("global_gate", self.global_gate.params_mut()));
        for (i, layer) in self.head.iter_mut().enumerate() {
            out.extend(prefixed(&format!("head{i}"), layer.params_mut()));
        }
        out
    }
}

impl crate::training::Trainable for FusionNet {
    type Sample = FeatureBundle;
    const KIND: &'static str = "fusion";

    fn sample_loss<'t>(&self, tape: &'t Tape, sample: &FeatureBundle) -> Result<Var<'t>> {
        self.loss(tape, sample)
    }

    fn check_sample(&self, sample: &FeatureBundle) -> Result<()> {
        sample.validate(&self.config.dims)?;
        sample.target().map(|_| ())
    }

    fn config_value(&self) -> serde_json::Value {
        serde_json::to_value(&self.config).expect("fusion config serialises")
    }

    fn from_config_value(config: &serde_json::Value) -> Result<Self> {
        let config: FusionConfig = serde_json::from_value(config.clone())
            .map_err(|e| Error::Config(format!("fusion config: {e}")))?;
        FusionNet::new(config)
    }
}
