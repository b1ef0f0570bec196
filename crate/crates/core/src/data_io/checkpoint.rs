//! Checkpoints: a directory of tensor files plus `index.json`.
//!
//! The index records the model kind, its configuration, free-form training
//! state and the list of stored tensors. Tensors are stored as f64 so a
//! reload is bit-exact.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::tensor_file::{encode_parts, read_tensor, DType};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const INDEX_FILE: &str = "index.json";
pub const CHECKPOINT_FORMAT: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    file: String,
    shape: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Index {
    format: u32,
    kind: String,
    config: Value,
    state: Value,
    tensors: Vec<TensorEntry>,
}

/// A tensor to store by name: shape and row-major data.
pub struct StoredTensor<'a> {
    pub name: String,
    pub shape: &'a [usize],
    pub data: &'a [f64],
}

impl<'a> StoredTensor<'a> {
    pub fn new(name: impl Into<String>, tensor: &'a Tensor) -> Self {
        StoredTensor {
            name: name.into(),
            shape: tensor.shape(),
            data: tensor.data(),
        }
    }
}

fn file_name(name: &str) -> String {
    let safe: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' })
        .collect();
    format!("{safe}.tftf")
}

pub fn write_checkpoint(
    dir: &Path,
    kind: &str,
    config: Value,
    state: Value,
    tensors: &[StoredTensor<'_>],
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(tensors.len());
    for t in tensors {
        let file = file_name(&t.name);
        let path = dir.join(&file);
        std::fs::write(&path, encode_parts(t.shape, t.data, DType::F64))
            .map_err(|e| Error::io(&path, e))?;
        entries.push(TensorEntry {
            name: t.name.clone(),
            file,
            shape: t.shape.to_vec(),
        });
    }
    let index = Index {
        format: CHECKPOINT_FORMAT,
        kind: kind.to_string(),
        config,
        state,
        tensors: entries,
    };
    let path = dir.join(INDEX_FILE);
    let text = serde_json::to_string_pretty(&index).map_err(|e| Error::json(&path, e))?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

/// A loaded checkpoint.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub dir: PathBuf,
    pub kind: String,
    pub config: Value,
    pub state: Value,
    pub tensors: BTreeMap<String, Tensor>,
}

impl Checkpoint {
    pub fn exists(dir: &Path) -> bool {
        dir.join(INDEX_FILE).is_file()
    }

    /// Reads a checkpoint; every failure is reported as [`Error::Checkpoint`].
    pub fn load(dir: impl AsRef<Path>) -> Result<Checkpoint> {
        let dir = dir.as_ref();
        let fail = |what: String| Error::Checkpoint(format!("{}: {what}", dir.display()));
        let path = dir.join(INDEX_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| fail(format!("{INDEX_FILE}: {e}")))?;
        let index: Index =
            serde_json::from_str(&text).map_err(|e| fail(format!("{INDEX_FILE}: {e}")))?;
        if index.format != CHECKPOINT_FORMAT {
            return Err(fail(format!("unsupported format {}", index.format)));
        }
        let mut tensors = BTreeMap::new();
        for entry in index.tensors {
            let t = read_tensor(dir.join(&entry.file)).map_err(|e| fail(e.to_string()))?;
            if t.shape() != entry.shape.as_slice() {
                return Err(fail(format!(
                    "tensor {} has shape {:?}, index says {:?}",
                    entry.name,
                    t.shape(),
                    entry.shape
                )));
            }
            tensors.insert(entry.name, t);
        }
        Ok(Checkpoint {
            dir: dir.to_path_buf(),
            kind: index.kind,
            config: index.config,
            state: index.state,
            tensors,
        })
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Checkpoint(format!(
                "{} holds a {} model, expected {kind}",
                self.dir.display(),
                self.kind
            )));
        }
        Ok(())
    }

    pub fn take(&mut self, name: &str) -> Result<Tensor> {
        self.tensors.remove(name).ok_or_else(|| {
            Error::Checkpoint(format!("{}: missing tensor {name}", self.dir.display()))
        })
    }

    /// Moves stored tensors into named parameter slots, checking shapes.
    pub fn restore<'a>(
        &mut self,
        params: impl IntoIterator<Item = (String, &'a mut Tensor)>,
    ) -> Result<()> {
        for (name, slot) in params {
            let t = self.take(&name)?;
            if t.shape() != slot.shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter {name}: stored shape {:?}, model expects {:?}",
                    t.shape(),
                    slot.shape()
                )));
            }
            *slot = t.requires_grad();
        }
        Ok(())
    }
}
