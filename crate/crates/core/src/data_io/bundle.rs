use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Row widths of the four modality streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDims {
    pub frame: usize,
    pub audio: usize,
    pub text: usize,
}

impl FeatureDims {
    /// Backbone widths: frame 512, audio 2048, title/description 768.
    pub const FULL: FeatureDims = FeatureDims {
        frame: 512,
        audio: 2048,
        text: 768,
    };

    pub fn concat_width(&self) -> usize {
        self.frame + self.audio + 2 * self.text
    }
}

/// One video's features.
#[derive(Clone, Debug)]
pub struct FeatureBundle {
    pub video_id: String,
    /// T_f×frame, one row per candidate frame.
    pub frames: Tensor,
    /// T_a×audio.
    pub audio: Tensor,
    pub title: Tensor,
    pub description: Tensor,
    /// Row of `frames` holding the ground-truth thumbnail.
    pub ground_truth: Option<usize>,
    /// Source frame id of each row of `frames`.
    pub frame_ids: Vec<usize>,
}

impl FeatureBundle {
    pub fn num_frames(&self) -> usize {
        self.frames.shape()[0]
    }

    pub fn num_audio(&self) -> usize {
        self.audio.shape()[0]
    }

    pub fn dims(&self) -> FeatureDims {
        FeatureDims {
            frame: self.frames.shape()[1],
            audio: self.audio.shape()[1],
            text: self.title.numel(),
        }
    }

    pub fn validate(&self, dims: &FeatureDims) -> Result<()> {
        check_matrix("frames", &self.frames, dims.frame)?;
        check_matrix("audio", &self.audio, dims.audio)?;
        check_vector("title", &self.title, dims.text)?;
        check_vector("description", &self.description, dims.text)?;
        let t_f = self.num_frames();
        if self.frame_ids.len() != t_f {
            return Err(Error::validation(
                "frames",
                format!("{} frame ids for {t_f} rows", self.frame_ids.len()),
            ));
        }
        if let Some(gt) = self.ground_truth {
            if gt >= t_f {
                return Err(Error::validation(
                    "ground_truth",
                    format!("index {gt} out of range for {t_f} frames"),
                ));
            }
        }
        Ok(())
    }

    /// The ground-truth frame's feature row.
    pub fn target(&self) -> Result<Tensor> {
        let gt = self.ground_truth.ok_or_else(|| {
            Error::TrainingData(format!("video {} has no ground-truth frame", self.video_id))
        })?;
        Ok(self.frames.row(gt))
    }
}

pub(crate) fn check_shape(modality: &str, shape: &[usize], width: usize, matrix: bool) -> Result<()> {
    let ok_rank = if matrix { shape.len() == 2 } else { shape.len() == 1 };
    if !ok_rank {
        let want = if matrix { "a T×d matrix" } else { "a vector" };
        return Err(Error::validation(
            modality,
            format!("expected {want}, got shape {shape:?}"),
        ));
    }
    if matrix && shape[0] == 0 {
        return Err(Error::validation(modality, "sequence has no rows"));
    }
    let got = *shape.last().unwrap();
    if got != width {
        return Err(Error::validation(
            modality,
            format!("width {got}, expected {width}"),
        ));
    }
    Ok(())
}

fn check_matrix(modality: &str, t: &Tensor, width: usize) -> Result<()> {
    check_shape(modality, t.shape(), width, true)
}

fn check_vector(modality: &str, t: &Tensor, width: usize) -> Result<()> {
    check_shape(modality, t.shape(), width, false)
}
