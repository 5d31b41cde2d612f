//! Versioned weights container.
//!
//! Byte layout (all integers little-endian):
//!
//! | offset | size | content                         |
//! |--------|------|---------------------------------|
//! | 0      | 4    | magic `EGWT`                    |
//! | 4      | 4    | u32 format version (currently 1)|
//! | 8      | 8    | u64 manifest length M in bytes  |
//! | 16     | M    | manifest, UTF-8 JSON            |
//! | 16+M   | rest | payload: raw little-endian f32  |
//!
//! The manifest is `{"version", "config", "tensors"}` where `config` is an
//! arbitrary caller-supplied JSON value (model hyperparameters) and each
//! tensor entry is `{"name", "shape", "dtype": "f32", "offset", "len"}` with
//! `offset` in bytes from the start of the payload and `len` in elements.
//! Tensors are written in list order with contiguous offsets, so saving the
//! same model twice produces byte-identical files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::Tensor;

pub const WEIGHTS_MAGIC: [u8; 4] = *b"EGWT";
pub const WEIGHTS_FORMAT_VERSION: u32 = 1;

/// Refuse absurd manifest lengths instead of allocating them.
const MANIFEST_LEN_CAP: u64 = 16 << 20;

#[derive(Debug, Error)]
pub enum WeightsError {
    #[error("bad magic {0:?}; not a weights file")]
    BadMagic([u8; 4]),
    #[error("unsupported weights format version {0}")]
    UnsupportedVersion(u32),
    #[error("unsupported tensor dtype {0:?}")]
    UnsupportedDtype(String),
    #[error("malformed weights file: {0}")]
    Corrupt(String),
    #[error("duplicate tensor name {0:?}")]
    DuplicateName(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    dtype: String,
    offset: u64,
    len: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    config: serde_json::Value,
    tensors: Vec<TensorEntry>,
}

pub fn save_weights<W: Write>(
    mut writer: W,
    config: &serde_json::Value,
    tensors: &[(String, &Tensor<f32>)],
) -> Result<(), WeightsError> {
    let mut entries = Vec::with_capacity(tensors.len());
    let mut offset = 0u64;
    for (name, tensor) in tensors {
        if entries.iter().any(|e: &TensorEntry| &e.name == name) {
            return Err(WeightsError::DuplicateName(name.clone()));
        }
        entries.push(TensorEntry {
            name: name.clone(),
            shape: tensor.shape().to_vec(),
            dtype: "f32".into(),
            offset,
            len: tensor.len() as u64,
        });
        offset += 4 * tensor.len() as u64;
    }
    let manifest = Manifest {
        version: WEIGHTS_FORMAT_VERSION,
        config: config.clone(),
        tensors: entries,
    };
    let manifest_bytes = serde_json::to_vec(&manifest)?;

    writer.write_all(&WEIGHTS_MAGIC)?;
    writer.write_all(&WEIGHTS_FORMAT_VERSION.to_le_bytes())?;
    writer.write_all(&(manifest_bytes.len() as u64).to_le_bytes())?;
    writer.write_all(&manifest_bytes)?;
    let mut buf = Vec::with_capacity(offset as usize);
    for (_, tensor) in tensors {
        for &v in tensor.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    writer.write_all(&buf)?;
    Ok(())
}

#[allow(clippy::type_complexity)]
pub fn load_weights<R: Read>(
    mut reader: R,
) -> Result<(serde_json::Value, Vec<(String, Tensor<f32>)>), WeightsError> {
    let mut magic = [0u8; 4];
    reader.read_exact(&mut magic)?;
    if magic != WEIGHTS_MAGIC {
        return Err(WeightsError::BadMagic(magic));
    }
    let mut word = [0u8; 4];
    reader.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != WEIGHTS_FORMAT_VERSION {
        return Err(WeightsError::UnsupportedVersion(version));
    }
    let mut long = [0u8; 8];
    reader.read_exact(&mut long)?;
    let manifest_len = u64::from_le_bytes(long);
    if manifest_len > MANIFEST_LEN_CAP {
        return Err(WeightsError::Corrupt(format!("manifest length {manifest_len} exceeds cap")));
    }
    let mut manifest_bytes = vec![0u8; manifest_len as usize];
    reader.read_exact(&mut manifest_bytes)?;
    let manifest: Manifest = serde_json::from_slice(&manifest_bytes)?;
    if manifest.version != version {
        return Err(WeightsError::Corrupt(format!(
            "manifest version {} disagrees with header {version}",
            manifest.version
        )));
    }
    let mut payload = Vec::new();
    reader.read_to_end(&mut payload)?;

    let mut tensors = Vec::with_capacity(manifest.tensors.len());
    for entry in manifest.tensors {
        if entry.dtype != "f32" {
            return Err(WeightsError::UnsupportedDtype(entry.dtype));
        }
        if tensors.iter().any(|(n, _)| n == &entry.name) {
            return Err(WeightsError::DuplicateName(entry.name));
        }
        let expected: usize = entry.shape.iter().product();
        if expected as u64 != entry.len {
            return Err(WeightsError::Corrupt(format!(
                "tensor {:?}: shape {:?} does not hold {} elements",
                entry.name, entry.shape, entry.len
            )));
        }
        let start = entry.offset as usize;
        let nbytes = entry.len as usize * 4;
        let end = start.checked_add(nbytes).filter(|&e| e <= payload.len()).ok_or_else(|| {
            WeightsError::Corrupt(format!(
                "tensor {:?}: payload range {}..{} out of bounds ({} bytes)",
                entry.name,
                start,
                start + nbytes,
                payload.len()
            ))
        })?;
        let data: Vec<f32> = payload[start..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let tensor = Tensor::new(entry.shape, data)
            .map_err(|e| WeightsError::Corrupt(e.to_string()))?;
        tensors.push((entry.name, tensor));
    }
    Ok((manifest.config, tensors))
}

pub fn save_weights_file<P: AsRef<Path>>(
    path: P,
    config: &serde_json::Value,
    tensors: &[(String, &Tensor<f32>)],
) -> Result<(), WeightsError> {
    save_weights(BufWriter::new(File::create(path)?), config, tensors)
}

#[allow(clippy::type_complexity)]
pub fn load_weights_file<P: AsRef<Path>>(
    path: P,
) -> Result<(serde_json::Value, Vec<(String, Tensor<f32>)>), WeightsError> {
    load_weights(BufReader::new(File::open(path)?))
}
