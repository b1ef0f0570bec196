//! Video manifests and dataset splits (JSON).
//!
//! A manifest names the four feature files of one video; relative paths are
//! resolved against the manifest's own directory.
//!
//! ```json
//! {
//!   "video_id": "v001",
//!   "category": "news",
//!   "frames": "v001/frames.tftf",
//!   "audio": "v001/audio.tftf",
//!   "title": "v001/title.tftf",
//!   "description": "v001/description.tftf",
//!   "ground_truth": {"index": 12},
//!   "frames_dir": "v001/frames",
//!   "duration_seconds": 93.5
//! }
//! ```
//!
//! A split lists video ids whose manifests live at `<manifest_dir>/<id>.json`:
//!
//! ```json
//! {"manifest_dir": "manifests", "train": ["v001"], "test": ["v002"]}
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::bundle::{check_shape, FeatureBundle, FeatureDims};
use super::tensor_file::read_raw;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroundTruth {
    /// Row of the frame feature matrix.
    Index(usize),
    /// Editorial thumbnail image, matched against frames in pixel space.
    Image(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoManifest {
    pub video_id: String,
    #[serde(default)]
    pub category: String,
    pub frames: PathBuf,
    pub audio: PathBuf,
    pub title: PathBuf,
    pub description: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<GroundTruth>,
    /// Source frame id of each feature row; defaults to `0..T_f`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_ids: Option<Vec<usize>>,
    /// Directory of the frame images; frame id `k` is the k-th image in sorted order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_seconds: Option<f64>,
    /// Directory relative paths resolve against; set on load.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl VideoManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: VideoManifest =
            serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(manifest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn ground_truth_image(&self) -> Option<PathBuf> {
        match &self.ground_truth {
            Some(GroundTruth::Image(p)) => Some(self.resolve(p)),
            _ => None,
        }
    }

    pub fn frames_dir(&self) -> Option<PathBuf> {
        self.frames_dir.as_deref().map(|p| self.resolve(p))
    }
}

fn load_modality(
    manifest: &VideoManifest,
    modality: &str,
    path: &Path,
    width: usize,
    matrix: bool,
) -> Result<crate::tensor::Tensor> {
    let raw = read_raw(manifest.resolve(path))?;
    check_shape(modality, &raw.dims, width, matrix)?;
    raw.into_tensor()
        .map_err(|e| Error::validation(modality, e.to_string()))
}

/// Loads and validates one video's features.
///
/// An image ground truth leaves `ground_truth` unset; it is resolved against
/// frame images by the caller.
pub fn load_bundle(manifest: &VideoManifest, dims: &FeatureDims) -> Result<FeatureBundle> {
    let frames = load_modality(manifest, "frames", &manifest.frames, dims.frame, true)?;
    let audio = load_modality(manifest, "audio", &manifest.audio, dims.audio, true)?;
    let title = load_modality(manifest, "title", &manifest.title, dims.text, false)?;
    let description = load_modality(
        manifest,
        "description",
        &manifest.description,
        dims.text,
        false,
    )?;
    let t_f = frames.shape()[0];
    let ground_truth = match manifest.ground_truth {
        Some(GroundTruth::Index(i)) => Some(i),
        _ => None,
    };
    let bundle = FeatureBundle {
        video_id: manifest.video_id.clone(),
        frames,
        audio,
        title,
        description,
        ground_truth,
        frame_ids: manifest.frame_ids.clone().unwrap_or_else(|| (0..t_f).collect()),
    };
    bundle.validate(dims)?;
    Ok(bundle)
}

/// Video ids for training and testing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    /// Directory containing `<video_id>.json` manifests, relative to the split file.
    #[serde(default)]
    pub manifest_dir: PathBuf,
    pub train: Vec<String>,
    pub test: Vec<String>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl DatasetSplit {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut split: DatasetSplit =
            serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        split.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        split.validate()?;
        Ok(split)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        let train: BTreeSet<&str> = self.train.iter().map(String::as_str).collect();
        if train.len() != self.train.len() {
            return Err(Error::Input("duplicate video id in train split".into()));
        }
        let test: BTreeSet<&str> = self.test.iter().map(String::as_str).collect();
        if test.len() != self.test.len() {
            return Err(Error::Input("duplicate video id in test split".into()));
        }
        if let Some(id) = train.intersection(&test).next() {
            return Err(Error::Input(format!(
                "video {id} appears in both train and test"
            )));
        }
        Ok(())
    }

    pub fn manifest_path(&self, video_id: &str) -> PathBuf {
        self.base_dir
            .join(&self.manifest_dir)
            .join(format!("{video_id}.json"))
    }

    pub fn load_manifests(&self, ids: &[String]) -> Result<Vec<VideoManifest>> {
        ids.iter()
            .map(|id| VideoManifest::load(self.manifest_path(id)))
            .collect()
    }
}
