//! Reading inputs and writing artifacts with their provenance.

use crate::error::{CliError, Result};
use fqa_core::artifact::ArtifactMeta;
use fqa_core::manifest::{read_jsonl, read_manifest, sidecar_path, write_json, ManifestRecord};
use fqa_core::model::{load_checkpoint, Checkpoint};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};
use std::path::Path;

/// Metadata for an artifact of `command`; `config` is the effective
/// configuration and `inputs` the files it was computed from.
pub fn metadata(command: &str, config: Value, inputs: &[(&str, &Path)]) -> Result<ArtifactMeta> {
    let mut meta = ArtifactMeta::new(command, config);
    for (role, path) in inputs {
        meta = meta.with_input(role, path).map_err(|e| CliError::input(path, e))?;
    }
    Ok(meta)
}

/// Serializes an argument struct, leaving out unset options.
pub fn config_value<T: Serialize>(args: &T) -> Value {
    match serde_json::to_value(args).expect("arguments serialize") {
        Value::Object(obj) => Value::Object(obj.into_iter().filter(|(_, v)| !v.is_null()).collect()),
        other => other,
    }
}

/// Writes `<artifact>.meta.json`: the metadata plus any extra fields.
pub fn write_sidecar(artifact: &Path, meta: &ArtifactMeta, extra: Value) -> Result<()> {
    let mut obj = Map::new();
    obj.insert("metadata".into(), meta.to_value());
    if let Value::Object(fields) = extra {
        obj.extend(fields);
    }
    Ok(write_json(&sidecar_path(artifact), &Value::Object(obj))?)
}

/// Reads a field of an artifact's sidecar, if both exist.
pub fn sidecar_field(artifact: &Path, field: &str) -> Option<Value> {
    let text = std::fs::read_to_string(sidecar_path(artifact)).ok()?;
    let v: Value = serde_json::from_str(&text).ok()?;
    v.get(field).cloned()
}

pub fn manifest(path: &Path) -> Result<Vec<ManifestRecord>> {
    read_manifest(path).map_err(|e| CliError::input(path, e))
}

pub fn jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    read_jsonl(path).map_err(|e| CliError::input(path, e))
}

pub fn checkpoint(path: &Path) -> Result<Checkpoint> {
    load_checkpoint(path).map_err(|e| CliError::input(path, e))
}

pub fn empty() -> Value {
    json!({})
}
