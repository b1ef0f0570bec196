//! Binary tensor files.
//!
//! Layout (all integers little-endian):
//!
//! | offset | size      | field                          |
//! |--------|-----------|--------------------------------|
//! | 0      | 4         | magic `TFTF`                   |
//! | 4      | 4 (u32)   | version, always 1              |
//! | 8      | 4 (u32)   | dtype: 0 = f32, 1 = f64        |
//! | 12     | 4 (u32)   | ndim                           |
//! | 16     | 8·ndim    | dims (u64 each)                |
//! | ..     | ..        | row-major payload              |
//!
//! The payload must be exactly `product(dims) · sizeof(dtype)` bytes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"TFTF";
pub const VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    F32,
    F64,
}

impl DType {
    pub fn code(self) -> u32 {
        match self {
            DType::F32 => 0,
            DType::F64 => 1,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(DType::F32),
            1 => Some(DType::F64),
            _ => None,
        }
    }

    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

/// A decoded file before shape validation; dims may contain zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTensor {
    pub dims: Vec<usize>,
    pub payload: Payload,
}

impl RawTensor {
    pub fn dtype(&self) -> DType {
        match self.payload {
            Payload::F32(_) => DType::F32,
            Payload::F64(_) => DType::F64,
        }
    }

    pub fn into_tensor(self) -> Result<Tensor> {
        let data = match self.payload {
            Payload::F32(v) => v.into_iter().map(f64::from).collect(),
            Payload::F64(v) => v,
        };
        Tensor::new(&self.dims, data)
    }
}

pub fn encode(tensor: &Tensor, dtype: DType) -> Vec<u8> {
    encode_parts(tensor.shape(), tensor.data(), dtype)
}

/// Encodes a shape and row-major data without building a [`Tensor`].
pub fn encode_parts(shape: &[usize], data: &[f64], dtype: DType) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * shape.len() + data.len() * dtype.size());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&dtype.code().to_le_bytes());
    out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
    for &d in shape {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    match dtype {
        DType::F32 => data
            .iter()
            .for_each(|&v| out.extend_from_slice(&(v as f32).to_le_bytes())),
        DType::F64 => data
            .iter()
            .for_each(|&v| out.extend_from_slice(&v.to_le_bytes())),
    }
    out
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::Format {
            offset,
            reason: "header truncated".into(),
        })
}

pub fn decode_raw(bytes: &[u8]) -> Result<RawTensor> {
    match bytes.get(..4) {
        Some(m) if m == MAGIC => {}
        Some(_) => {
            return Err(Error::Format {
                offset: 0,
                reason: "bad magic".into(),
            })
        }
        None => {
            return Err(Error::Format {
                offset: 0,
                reason: "header truncated".into(),
            })
        }
    }
    let version = read_u32(bytes, 4)?;
    if version != VERSION {
        return Err(Error::Format {
            offset: 4,
            reason: format!("unsupported version {version}"),
        });
    }
    let code = read_u32(bytes, 8)?;
    let dtype = DType::from_code(code).ok_or_else(|| Error::Format {
        offset: 8,
        reason: format!("unknown dtype code {code}"),
    })?;
    let ndim = read_u32(bytes, 12)? as usize;
    let mut dims = Vec::with_capacity(ndim.min(64));
    let mut offset = 16;
    let mut count: usize = 1;
    for _ in 0..ndim {
        let d = bytes
            .get(offset..offset + 8)
            .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
            .ok_or_else(|| Error::Format {
                offset,
                reason: "dims truncated".into(),
            })?;
        let d = usize::try_from(d).map_err(|_| Error::Format {
            offset,
            reason: "dimension too large".into(),
        })?;
        count = count.checked_mul(d).ok_or_else(|| Error::Format {
            offset,
            reason: "element count overflows".into(),
        })?;
        dims.push(d);
        offset += 8;
    }
    let expected = count.checked_mul(dtype.size()).ok_or_else(|| Error::Format {
        offset,
        reason: "payload size overflows".into(),
    })?;
    let payload = &bytes[offset..];
    if payload.len() != expected {
        return Err(Error::Corrupt {
            expected,
            actual: payload.len(),
        });
    }
    let payload = match dtype {
        DType::F32 => Payload::F32(
            payload
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect(),
        ),
        DType::F64 => Payload::F64(
            payload
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect(),
        ),
    };
    Ok(RawTensor { dims, payload })
}

pub fn decode(bytes: &[u8]) -> Result<Tensor> {
    decode_raw(bytes)?.into_tensor()
}

pub fn write_tensor(path: impl AsRef<Path>, tensor: &Tensor, dtype: DType) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode(tensor, dtype)).map_err(|e| Error::io(path, e))
}

pub fn read_raw(path: impl AsRef<Path>) -> Result<RawTensor> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_raw(&bytes)
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    read_raw(path)?.into_tensor()
}
