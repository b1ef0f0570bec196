//! Synthetic aesthetic images whose score is readable from the pixels.
//!
//! Each image has a latent quality q ∈ [0, 1]. Brighter, cleaner images
//! score higher: brightness rises with q and high-frequency noise falls.
//! Vote histograms are 50 draws of `round(N(2 + 6q, 1.5))` clipped to 1..=10.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::labels::AvaLabel;
use crate::data_io::Image;

pub const VOTES: usize = 50;

pub fn synthetic_aesthetic_image<R: Rng + ?Sized>(size: usize, quality: f64, rng: &mut R) -> Image {
    let brightness = 0.2 + 0.6 * quality;
    let noise = 0.3 * (1.0 - quality);
    let tint: [f64; 3] = [rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1)];
    let slope = rng.gen_range(-0.15..0.15);
    let mut jitter = Vec::with_capacity(size * size * 3);
    for _ in 0..size * size * 3 {
        jitter.push(rng.gen_range(-1.0..1.0) * noise);
    }
    Image::from_fn(size, size, |y, x, c| {
        let ramp = slope * (x as f64 / size as f64 - 0.5);
        let j = jitter[(y * size + x) * 3 + c];
        (brightness + tint[c] + ramp + j).clamp(0.0, 1.0)
    })
}

pub fn synthetic_votes<R: Rng + ?Sized>(quality: f64, rng: &mut R) -> AvaLabel {
    let normal = Normal::new(2.0 + 6.0 * quality, 1.5).expect("valid normal");
    let mut counts = [0u64; 10];
    for _ in 0..VOTES {
        let s = normal.sample(rng).round().clamp(1.0, 10.0) as usize;
        counts[s - 1] += 1;
    }
    AvaLabel::new(counts)
}

/// `n` seeded (image, histogram) pairs of side `size`.
pub fn synthetic_aesthetic(seed: u64, n: usize, size: usize) -> Vec<(Image, AvaLabel)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let q: f64 = rng.gen();
            let image = synthetic_aesthetic_image(size, q, &mut rng);
            (image, synthetic_votes(q, &mut rng))
        })
        .collect()
}
