//! Aesthetic frame filtering.
//!
//! Frames are subsampled, scored by a double-column CNN that sees a
//! resized global view and a seeded local crop, and the best `k` are kept
//! in temporal order.

mod ablation;
mod frames;
mod labels;
mod net;
pub mod synthetic;
mod views;

pub use ablation::{ablate_depth, label_variance, AblationReport, AblationRow};
pub use frames::{sample_frames, top_k_indices, FrameSequence};
pub use labels::{ava_weighted_mean, read_ava_csv, write_ava_csv, AvaLabel};
pub use net::{
    dcnn_score, score_frames, top_k_frames, AestheticSample, Column, ConvBlock, FilterConfig,
    FilterNet,
};
pub use views::{make_views, ViewPair};

use crate::error::Result;

/// Builds training samples from (image, histogram) pairs; sample `i` uses
/// crop seed `config.crop_seed_for(i)`.
pub fn aesthetic_samples(
    pairs: &[(crate::data_io::Image, AvaLabel)],
    config: &FilterConfig,
) -> Result<Vec<AestheticSample>> {
    pairs
        .iter()
        .enumerate()
        .map(|(i, (image, label))| {
            Ok(AestheticSample {
                views: make_views(image, config.view_size, config.crop_seed_for(i))?,
                label: ava_weighted_mean(label)?,
            })
        })
        .collect()
}
