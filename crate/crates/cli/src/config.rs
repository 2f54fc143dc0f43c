//! Flag/config-file merging. Each subcommand's arguments are a struct of
//! optional fields; a JSON config file supplies values for the fields that
//! were not given on the command line.

use crate::error::{CliError, Result};
use crate::Globals;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use std::path::Path;

fn normalize_keys(obj: Map<String, Value>) -> Map<String, Value> {
    obj.into_iter().map(|(k, v)| (k.replace('-', "_"), v)).collect()
}

/// Merges the global flags and config file into a subcommand's arguments.
pub fn resolve<T: Serialize + DeserializeOwned>(g: &Globals, args: &T) -> Result<T> {
    let mut given = serde_json::to_value(args).expect("flags serialize");
    if let (Some(seed), Some(slot)) = (g.seed, given.get_mut("seed")) {
        *slot = Value::from(seed);
    }
    let with_seed: T = serde_json::from_value(given).expect("seed fits the argument struct");
    merge(g.config.as_deref(), &with_seed)
}

/// Returns `flags` with unset fields filled from the config file. Keys may
/// be written in flag style (`batch-size`) or field style (`batch_size`).
pub fn merge<T: Serialize + DeserializeOwned>(config: Option<&Path>, flags: &T) -> Result<T> {
    let mut merged = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
            match serde_json::from_str(&text) {
                Ok(Value::Object(obj)) => normalize_keys(obj),
                Ok(_) => {
                    return Err(CliError::Config {
                        path: path.to_path_buf(),
                        message: "expected a JSON object".into(),
                    })
                }
                Err(e) => {
                    return Err(CliError::Config {
                        path: path.to_path_buf(),
                        message: e.to_string(),
                    })
                }
            }
        }
        None => Map::new(),
    };
    let Value::Object(given) = serde_json::to_value(flags).expect("flags serialize") else {
        unreachable!("argument structs serialize to objects")
    };
    if let Some(path) = config {
        if let Some(key) = merged.keys().find(|k| !given.contains_key(*k)) {
            return Err(CliError::Config {
                path: path.to_path_buf(),
                message: format!("unknown option `{key}`"),
            });
        }
    }
    merged.extend(given.into_iter().filter(|(_, v)| !v.is_null()));
    serde_json::from_value(Value::Object(merged)).map_err(|e| match config {
        Some(path) => CliError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        },
        None => CliError::Usage(e.to_string()),
    })
}

pub fn require<T>(value: Option<T>, flag: &str) -> Result<T> {
    value.ok_or_else(|| CliError::Usage(format!("missing required --{flag} (flag or config key)")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, Default, PartialEq, Serialize, Deserialize)]
    #[serde(default)]
    struct Flags {
        epochs: Option<usize>,
        batch_size: Option<usize>,
        out: Option<String>,
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"epochs": 5, "batch-size": 8}"#).unwrap();
        let flags = Flags {
            epochs: Some(9),
            ..Flags::default()
        };
        let m = merge(Some(&path), &flags).unwrap();
        assert_eq!(
            m,
            Flags {
                epochs: Some(9),
                batch_size: Some(8),
                out: None
            }
        );
    }

    #[test]
    fn unknown_keys_name_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, r#"{"epoch": 5}"#).unwrap();
        let err = merge(Some(&path), &Flags::default()).unwrap_err();
        assert!(err.to_string().contains("bad.json") && err.to_string().contains("epoch"), "{err}");
        assert_eq!(err.exit_code(), 1);
    }
}
