//! Provenance stamped into every artifact: tool version, the effective
//! configuration, and content hashes of the inputs.

use crate::{FqaError, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

pub const TOOL_NAME: &str = "fqa";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ArtifactMeta {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    /// Input role (e.g. "manifest", "model") to SHA-256 of the file content.
    pub inputs: BTreeMap<String, String>,
}

impl ArtifactMeta {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        ArtifactMeta {
            tool: TOOL_NAME.to_string(),
            version: TOOL_VERSION.to_string(),
            command: command.to_string(),
            config,
            inputs: BTreeMap::new(),
        }
    }

    pub fn with_input(mut self, role: &str, path: &Path) -> Result<Self> {
        self.inputs.insert(role.to_string(), hash_file(path)?);
        Ok(self)
    }

    pub fn with_input_hash(mut self, role: &str, hash: String) -> Self {
        self.inputs.insert(role.to_string(), hash);
        self
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("metadata is always serializable")
    }
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| FqaError::io(path, e))?;
    Ok(hash_bytes(&bytes))
}

/// Derives a child seed from a run seed and a label (image id, split name).
/// Stable across platforms and releases.
pub fn derive_seed(run_seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(run_seed.to_le_bytes());
    h.update(label.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}
