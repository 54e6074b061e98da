//! Weights container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! b"SSNW" | version: u32 | manifest_len: u32 | manifest (JSON, UTF-8) | payload
//! ```
//!
//! The manifest holds the model config and a tensor table (name, shape, byte
//! offset into the payload). The payload is every tensor's row-major `f32`
//! values, back to back.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::weights::{ModelWeights, Parameter, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"SSNW";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    config: ModelConfig,
    tensors: Vec<TensorEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

pub fn serialize(weights: &ModelWeights) -> Result<Vec<u8>> {
    let mut offset = 0;
    let tensors = weights
        .params()
        .iter()
        .map(|p| {
            let entry = TensorEntry {
                name: p.name.clone(),
                shape: p.tensor.shape().to_vec(),
                offset,
            };
            offset += 4 * p.tensor.len();
            entry
        })
        .collect();
    let manifest = serde_json::to_vec(&Manifest {
        config: weights.config().clone(),
        tensors,
    })
    .map_err(|e| Error::Format(e.to_string()))?;

    let mut out = Vec::with_capacity(12 + manifest.len() + offset);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&weights.version().to_le_bytes());
    out.extend_from_slice(&(manifest.len() as u32).to_le_bytes());
    out.extend_from_slice(&manifest);
    for p in weights.params() {
        for v in p.tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

fn take<'a>(bytes: &mut &'a [u8], n: usize, what: &str) -> Result<&'a [u8]> {
    if bytes.len() < n {
        return Err(Error::Format(format!("truncated stream while reading {what}")));
    }
    let (head, rest) = bytes.split_at(n);
    *bytes = rest;
    Ok(head)
}

fn read_u32(bytes: &mut &[u8], what: &str) -> Result<u32> {
    let raw = take(bytes, 4, what)?;
    Ok(u32::from_le_bytes(raw.try_into().expect("4 bytes")))
}

pub fn deserialize(mut bytes: &[u8]) -> Result<ModelWeights> {
    if take(&mut bytes, 4, "magic")? != MAGIC {
        return Err(Error::Format("bad magic bytes, not a weights file".into()));
    }
    let version = read_u32(&mut bytes, "version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let manifest_len = read_u32(&mut bytes, "manifest length")? as usize;
    let manifest: Manifest = serde_json::from_slice(take(&mut bytes, manifest_len, "manifest")?)
        .map_err(|e| Error::Format(format!("manifest: {e}")))?;

    let payload = bytes;
    let mut expected_offset = 0;
    let mut params = Vec::with_capacity(manifest.tensors.len());
    for entry in manifest.tensors {
        if entry.offset != expected_offset {
            return Err(Error::Format(format!(
                "tensor `{}` at offset {} (expected {expected_offset})",
                entry.name, entry.offset
            )));
        }
        let count: usize = entry.shape.iter().product();
        let end = entry.offset + 4 * count;
        let raw = payload.get(entry.offset..end).ok_or_else(|| {
            Error::Format(format!("truncated stream inside tensor `{}`", entry.name))
        })?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        params.push(Parameter {
            name: entry.name,
            tensor: Tensor::new(&entry.shape, data)?,
        });
        expected_offset = end;
    }
    if expected_offset != payload.len() {
        return Err(Error::Format(format!(
            "{} trailing payload bytes",
            payload.len() - expected_offset
        )));
    }
    ModelWeights::from_parameters(manifest.config, params)
        .map_err(|e| Error::Format(format!("config/shape mismatch: {e}")))
}

pub fn save_weights(weights: &ModelWeights, path: &Path) -> Result<()> {
    fs::write(path, serialize(weights)?).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn load_weights(path: &Path) -> Result<ModelWeights> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    deserialize(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_model, Padding, Pooling};
    use crate::scattering::ScatteringConfig;

    fn small_config() -> ModelConfig {
        ModelConfig {
            scattering: ScatteringConfig {
                scales: 1,
                orientations: 2,
                height: 16,
                width: 16,
            },
            conv_filters: vec![4, 4],
            kernel: 3,
            padding: Padding::Same,
            pool_after_block: vec![Pooling::Floor, Pooling::None],
            embedding_dim: 8,
            normalize_embeddings: true,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let w = init_model(&small_config(), 5).unwrap();
        let bytes = serialize(&w).unwrap();
        let back = deserialize(&bytes).unwrap();
        assert_eq!(back, w);
        assert_eq!(serialize(&back).unwrap(), bytes);
    }

    #[test]
    fn corrupt_magic_is_rejected() {
        let w = init_model(&small_config(), 5).unwrap();
        let mut bytes = serialize(&w).unwrap();
        bytes[0] = b'X';
        assert!(matches!(deserialize(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn truncation_and_version_are_detected() {
        let w = init_model(&small_config(), 5).unwrap();
        let bytes = serialize(&w).unwrap();
        for cut in [2, 9, 40, bytes.len() - 1] {
            assert!(matches!(deserialize(&bytes[..cut]), Err(Error::Format(_))), "cut {cut}");
        }
        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert!(deserialize(&v2).unwrap_err().to_string().contains("version"));
        let mut extra = bytes;
        extra.push(0);
        assert!(deserialize(&extra).is_err());
    }

    #[test]
    fn config_shape_mismatch_is_rejected() {
        let w = init_model(&small_config(), 5).unwrap();
        let bytes = serialize(&w).unwrap();
        let len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let manifest = std::str::from_utf8(&bytes[12..12 + len]).unwrap();
        // claim a different embedding size while keeping the payload
        let edited = manifest.replacen("\"embedding_dim\":8", "\"embedding_dim\":9", 1);
        assert_ne!(edited, manifest);
        let mut out = bytes[..8].to_vec();
        out.extend_from_slice(&(edited.len() as u32).to_le_bytes());
        out.extend_from_slice(edited.as_bytes());
        out.extend_from_slice(&bytes[12 + len..]);
        let err = deserialize(&out).unwrap_err();
        assert!(err.to_string().contains("mismatch"), "{err}");
    }
}
