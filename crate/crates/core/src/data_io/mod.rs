//! Persistence: tensor files, images, manifests, checkpoints and synthetic data.

pub mod bundle;
pub mod checkpoint;
pub mod image;
pub mod manifest;
pub mod synth;
pub mod tensor_file;

pub use bundle::{FeatureBundle, FeatureDims};
pub use checkpoint::{write_checkpoint, Checkpoint, StoredTensor};
pub use image::{read_image, write_ppm, Image};
pub use manifest::{load_bundle, DatasetSplit, GroundTruth, VideoManifest};
pub use synth::{synth_bundle, synth_bundle_with, Plant};
pub use tensor_file::{read_tensor, write_tensor, DType};
