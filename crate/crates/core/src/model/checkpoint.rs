//! Binary checkpoint format.
//!
//! Layout: magic `FQCK`, `u32` format version, `u64` header length, the
//! header as compact JSON, zero padding up to a 16-byte boundary, then the
//! tensor blob as little-endian `f32`. Tensor offsets are byte offsets into
//! the blob. All integers are little-endian.

use super::network::Network;
use super::spec::NetworkSpec;
use crate::manifest::write_file;
use crate::preprocess::Normalization;
use crate::{FqaError, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::Path;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"FQCK";
pub const CHECKPOINT_VERSION: u32 = 1;
const ALIGN: usize = 16;
const PREAMBLE: usize = 16;

/// A network plus everything needed to use it on raw images.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub network: Network<f32>,
    pub normalization: Normalization,
    /// Identity label of each classifier row (recognizers only).
    pub classes: Vec<String>,
    /// Free-form provenance (tool version, config, input hashes).
    pub metadata: serde_json::Value,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum TensorKind {
    Param,
    Buffer,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    kind: TensorKind,
    shape: Vec<usize>,
    offset: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    spec: NetworkSpec,
    normalization: Normalization,
    classes: Vec<String>,
    metadata: serde_json::Value,
    tensors: Vec<TensorEntry>,
}

fn tensor_err(name: &str, message: impl Into<String>) -> FqaError {
    FqaError::CheckpointTensor {
        tensor: name.to_string(),
        message: message.into(),
    }
}

impl Checkpoint {
    pub fn new(network: Network<f32>, normalization: Normalization) -> Self {
        Checkpoint {
            network,
            normalization,
            classes: Vec::new(),
            metadata: serde_json::Value::Null,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let store = self.network.store();
        let mut tensors = Vec::new();
        let mut blob: Vec<u8> = Vec::with_capacity(4 * (store.num_param_elements() + store.num_buffer_elements()));
        let mut push = |name: &str, kind: TensorKind, shape: &[usize], data: &[f32]| {
            tensors.push(TensorEntry {
                name: name.to_string(),
                kind,
                shape: shape.to_vec(),
                offset: blob.len() as u64,
            });
            for v in data {
                blob.extend_from_slice(&v.to_le_bytes());
            }
        };
        for p in store.params() {
            push(&p.name, TensorKind::Param, p.value.shape(), p.value.data());
        }
        for (name, t) in store.buffers() {
            push(name, TensorKind::Buffer, t.shape(), t.data());
        }
        let header = Header {
            format_version: CHECKPOINT_VERSION,
            spec: self.network.spec().clone(),
            normalization: self.normalization,
            classes: self.classes.clone(),
            metadata: self.metadata.clone(),
            tensors,
        };
        let json = serde_json::to_vec(&header).map_err(|e| FqaError::Checkpoint(e.to_string()))?;
        let blob_start = (PREAMBLE + json.len()).div_ceil(ALIGN) * ALIGN;
        let mut out = Vec::with_capacity(blob_start + blob.len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        out.resize(blob_start, 0);
        out.extend_from_slice(&blob);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < PREAMBLE || &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(FqaError::Checkpoint("missing FQCK magic".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(FqaError::Checkpoint(format!(
                "unsupported format version {version} (expected {CHECKPOINT_VERSION})"
            )));
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
        let header_end = usize::try_from(header_len)
            .ok()
            .and_then(|n| n.checked_add(PREAMBLE))
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| FqaError::Checkpoint(format!("header length {header_len} exceeds file size")))?;
        let header: Header =
            serde_json::from_slice(&bytes[PREAMBLE..header_end]).map_err(|e| FqaError::Checkpoint(format!("corrupted header: {e}")))?;
        if header.format_version != version {
            return Err(FqaError::Checkpoint(format!(
                "header version {} disagrees with preamble version {version}",
                header.format_version
            )));
        }
        let blob_start = header_end.div_ceil(ALIGN) * ALIGN;
        let blob = bytes.get(blob_start..).unwrap_or(&[]);

        let mut network = Network::<f32>::new(header.spec, 0)?;
        let mut seen = BTreeSet::new();
        for entry in &header.tensors {
            let name = entry.name.as_str();
            if !seen.insert(name) {
                return Err(tensor_err(name, "listed more than once in the index"));
            }
            let store = network.store_mut();
            let target = match entry.kind {
                TensorKind::Param => store.find_param(name).map(|id| &mut store.param_mut(id).value),
                TensorKind::Buffer => store.buffers_mut().iter_mut().find(|(n, _)| n == name).map(|(_, t)| t),
            };
            let Some(target) = target else {
                return Err(tensor_err(name, format!("no {:?} with this name in the network", entry.kind)));
            };
            if target.shape() != entry.shape.as_slice() {
                return Err(tensor_err(
                    name,
                    format!("shape {:?} does not match network shape {:?}", entry.shape, target.shape()),
                ));
            }
            let len = 4 * target.len();
            let start = usize::try_from(entry.offset).map_err(|_| tensor_err(name, "offset out of range"))?;
            if start % 4 != 0 {
                return Err(tensor_err(name, format!("offset {start} is not 4-byte aligned")));
            }
            let Some(raw) = start.checked_add(len).and_then(|end| blob.get(start..end)) else {
                return Err(tensor_err(
                    name,
                    format!("bytes {start}..{} out of range of a {}-byte blob", start + len, blob.len()),
                ));
            };
            for (dst, src) in target.data_mut().iter_mut().zip(raw.chunks_exact(4)) {
                *dst = f32::from_le_bytes(src.try_into().unwrap());
            }
            if !target.all_finite() {
                return Err(tensor_err(name, "contains non-finite values"));
            }
        }
        let store = network.store();
        let expected = store
            .params()
            .iter()
            .map(|p| p.name.as_str())
            .chain(store.buffers().iter().map(|(n, _)| n.as_str()));
        for name in expected {
            if !seen.contains(name) {
                return Err(tensor_err(name, "missing from the index"));
            }
        }
        Ok(Checkpoint {
            network,
            normalization: header.normalization,
            classes: header.classes,
            metadata: header.metadata,
        })
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    write_file(path, &ckpt.to_bytes()?)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| FqaError::io(path, e))?;
    Checkpoint::from_bytes(&bytes).map_err(|e| match e {
        FqaError::Checkpoint(msg) => FqaError::Checkpoint(format!("{}: {msg}", path.display())),
        FqaError::CheckpointTensor { tensor, message } => FqaError::CheckpointTensor {
            tensor,
            message: format!("{message} (in {})", path.display()),
        },
        other => other,
    })
}
