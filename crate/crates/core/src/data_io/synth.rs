//! Seeded synthetic feature bundles for running the pipeline without backbones.
//!
//! In a planted bundle the ground-truth row is `tanh(standardise(z))` with
//! `z = t·P_t + d·P_d + mean(A)·P_a` for fixed Gaussian plant matrices, so
//! the target is a learnable function of the other modalities. All other
//! frame rows are `tanh` of standard Gaussian noise; standardising `z` keeps
//! the planted row's energy indistinguishable from theirs.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::bundle::{FeatureBundle, FeatureDims};
use super::manifest::{DatasetSplit, GroundTruth, VideoManifest};
use super::tensor_file::{write_tensor, DType};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Seed of the plant matrices; shared by every planted bundle.
pub const PLANT_SEED: u64 = 0x5EED_F00D;

/// The fixed map from (title, description, mean audio) to the planted frame row.
#[derive(Clone, Debug)]
pub struct Plant {
    dims: FeatureDims,
    title: Tensor,
    description: Tensor,
    audio: Tensor,
}

impl Plant {
    pub fn new(dims: FeatureDims) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(PLANT_SEED);
        Plant {
            dims,
            title: Tensor::randn(&[dims.text, dims.frame], &mut rng),
            description: Tensor::randn(&[dims.text, dims.frame], &mut rng),
            audio: Tensor::randn(&[dims.audio, dims.frame], &mut rng),
        }
    }

    pub fn dims(&self) -> FeatureDims {
        self.dims
    }

    pub fn row(&self, title: &Tensor, description: &Tensor, audio: &Tensor) -> Tensor {
        let FeatureDims { frame, audio: da, .. } = self.dims;
        let t_a = audio.shape()[0];
        let mut mean_a = vec![0.0; da];
        for r in 0..t_a {
            for (m, x) in mean_a.iter_mut().zip(&audio.data()[r * da..(r + 1) * da]) {
                *m += x;
            }
        }
        mean_a.iter_mut().for_each(|m| *m /= t_a as f64);
        let mut z = vec![0.0; frame];
        let mut project = |x: &[f64], p: &Tensor| {
            for (i, &xi) in x.iter().enumerate() {
                let prow = &p.data()[i * frame..(i + 1) * frame];
                z.iter_mut().zip(prow).for_each(|(zj, pj)| *zj += xi * pj);
            }
        };
        project(title.data(), &self.title);
        project(description.data(), &self.description);
        project(&mean_a, &self.audio);
        let n = frame as f64;
        let mean = z.iter().sum::<f64>() / n;
        let var = z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        Tensor::vector(z.into_iter().map(|v| ((v - mean) / scale).tanh()).collect())
    }
}

/// Builds a seeded bundle. When `plant` is given, the ground-truth row is
/// replaced by the plant function of the other modalities.
pub fn synth_bundle_with(
    seed: u64,
    t_f: usize,
    t_a: usize,
    dims: FeatureDims,
    plant: Option<&Plant>,
) -> Result<FeatureBundle> {
    if t_f == 0 || t_a == 0 {
        return Err(Error::Input(format!(
            "synthetic bundle needs T_f, T_a ≥ 1, got {t_f}, {t_a}"
        )));
    }
    if let Some(p) = plant {
        if p.dims() != dims {
            return Err(Error::Config("plant dimensions differ from bundle".into()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let title = Tensor::randn(&[dims.text], &mut rng);
    let description = Tensor::randn(&[dims.text], &mut rng);
    let audio = Tensor::randn(&[t_a, dims.audio], &mut rng);
    let mut frames = Tensor::randn(&[t_f, dims.frame], &mut rng).map(f64::tanh);
    let gt = rng.gen_range(0..t_f);
    if let Some(p) = plant {
        let row = p.row(&title, &description, &audio);
        frames.data_mut()[gt * dims.frame..(gt + 1) * dims.frame].copy_from_slice(row.data());
    }
    Ok(FeatureBundle {
        video_id: format!("synth-{seed}"),
        frames,
        audio,
        title,
        description,
        ground_truth: Some(gt),
        frame_ids: (0..t_f).collect(),
    })
}

pub fn synth_bundle(
    seed: u64,
    t_f: usize,
    t_a: usize,
    planted: bool,
    dims: FeatureDims,
) -> Result<FeatureBundle> {
    let plant = planted.then(|| Plant::new(dims));
    synth_bundle_with(seed, t_f, t_a, dims, plant.as_ref())
}

/// Writes a bundle's four tensors next to a manifest `<dir>/<video_id>.json`.
pub fn write_bundle(dir: &Path, bundle: &FeatureBundle, dtype: DType) -> Result<VideoManifest> {
    let id = &bundle.video_id;
    let sub = dir.join(id);
    std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
    let rel = |name: &str| Path::new(id).join(name);
    write_tensor(sub.join("frames.tftf"), &bundle.frames, dtype)?;
    write_tensor(sub.join("audio.tftf"), &bundle.audio, dtype)?;
    write_tensor(sub.join("title.tftf"), &bundle.title, dtype)?;
    write_tensor(sub.join("description.tftf"), &bundle.description, dtype)?;
    let manifest = VideoManifest {
        video_id: id.clone(),
        category: "synthetic".into(),
        frames: rel("frames.tftf"),
        audio: rel("audio.tftf"),
        title: rel("title.tftf"),
        description: rel("description.tftf"),
        ground_truth: bundle.ground_truth.map(GroundTruth::Index),
        frame_ids: Some(bundle.frame_ids.clone()),
        frames_dir: None,
        duration_seconds: None,
        base_dir: dir.to_path_buf(),
    };
    manifest.save(dir.join(format!("{id}.json")))?;
    Ok(manifest)
}

/// Options for [`write_synth_dataset`].
#[derive(Clone, Debug)]
pub struct SynthDataset {
    pub seed: u64,
    pub train: usize,
    pub test: usize,
    pub frames: usize,
    pub audio: usize,
    pub planted: bool,
    pub dims: FeatureDims,
    pub dtype: DType,
}

/// Writes `train + test` bundles under `<dir>/manifests` and a `split.json`.
///
/// Video `i` is generated from seed `seed + i`.
pub fn write_synth_dataset(dir: &Path, opts: &SynthDataset) -> Result<DatasetSplit> {
    let manifests = dir.join("manifests");
    std::fs::create_dir_all(&manifests).map_err(|e| Error::io(&manifests, e))?;
    let plant = opts.planted.then(|| Plant::new(opts.dims));
    let mut ids = Vec::new();
    for i in 0..opts.train + opts.test {
        let mut bundle = synth_bundle_with(
            opts.seed.wrapping_add(i as u64),
            opts.frames,
            opts.audio,
            opts.dims,
            plant.as_ref(),
        )?;
        bundle.video_id = format!("video{i:04}");
        write_bundle(&manifests, &bundle, opts.dtype)?;
        ids.push(bundle.video_id);
    }
    let test = ids.split_off(opts.train);
    let split = DatasetSplit {
        manifest_dir: "manifests".into(),
        train: ids,
        test,
        base_dir: dir.to_path_buf(),
    };
    split.save(dir.join("split.json"))?;
    Ok(split)
}
