use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data_io::Image;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// The two S×S×3 inputs of the filter network.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewPair {
    /// Whole frame resized to S×S, aspect ratio ignored.
    pub global: Tensor,
    /// S×S crop at a seeded offset.
    pub local: Tensor,
}

impl ViewPair {
    pub fn size(&self) -> usize {
        self.global.shape()[0]
    }
}

/// Builds both views. Frames narrower or shorter than S are first upscaled,
/// keeping their aspect ratio, until the short side is S.
pub fn make_views(frame: &Image, size: usize, crop_seed: u64) -> Result<ViewPair> {
    if size == 0 {
        return Err(Error::Input("view size must be positive".into()));
    }
    let global = frame.resize(size, size).to_tensor();
    let (h, w) = (frame.height(), frame.width());
    let source = if h < size || w < size {
        let scale = size as f64 / h.min(w) as f64;
        let nh = ((h as f64 * scale).round() as usize).max(size);
        let nw = ((w as f64 * scale).round() as usize).max(size);
        frame.resize(nh, nw)
    } else {
        frame.clone()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(crop_seed);
    let top = rng.gen_range(0..=source.height() - size);
    let left = rng.gen_range(0..=source.width() - size);
    let local = source.crop(top, left, size, size)?.to_tensor();
    Ok(ViewPair { global, local })
}
