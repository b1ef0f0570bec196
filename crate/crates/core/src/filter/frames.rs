use crate::data_io::Image;
use crate::error::{Error, Result};

/// Frames in temporal order together with their source positions.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FrameSequence {
    frames: Vec<Image>,
    indices: Vec<usize>,
}

impl FrameSequence {
    /// Frames numbered `0..n`.
    pub fn new(frames: Vec<Image>) -> Self {
        let indices = (0..frames.len()).collect();
        FrameSequence { frames, indices }
    }

    pub fn from_parts(frames: Vec<Image>, indices: Vec<usize>) -> Result<Self> {
        if frames.len() != indices.len() {
            return Err(Error::Input(format!(
                "{} frames but {} indices",
                frames.len(),
                indices.len()
            )));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Input("frame indices must be strictly increasing".into()));
        }
        Ok(FrameSequence { frames, indices })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[Image] {
        &self.frames
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Image)> {
        self.indices.iter().copied().zip(&self.frames)
    }

    /// Keeps the frames at the given positions (not source indices), in order.
    pub fn subset(&self, positions: &[usize]) -> FrameSequence {
        FrameSequence {
            frames: positions.iter().map(|&p| self.frames[p].clone()).collect(),
            indices: positions.iter().map(|&p| self.indices[p]).collect(),
        }
    }
}

/// Keeps every `stride`-th frame starting with the first.
pub fn sample_frames(seq: &FrameSequence, stride: usize) -> Result<FrameSequence> {
    if stride == 0 {
        return Err(Error::Usage("sampling stride must be at least 1".into()));
    }
    let positions: Vec<usize> = (0..seq.len()).step_by(stride).collect();
    Ok(seq.subset(&positions))
}

/// Positions of the `k` largest scores, returned in temporal order. Equal
/// scores prefer the earlier position.
pub fn top_k_indices(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    order.sort_unstable();
    order
}
