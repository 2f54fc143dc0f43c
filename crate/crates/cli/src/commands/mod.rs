pub mod data;
pub mod evaluate;
pub mod inspect;
pub mod train;

use crate::error::{CliError, Result};
use serde::de::DeserializeOwned;

/// Parses a snake_case enum value given as a flag or config string.
pub fn parse_choice<T: DeserializeOwned>(value: &str, flag: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(value.to_string())).map_err(|e| CliError::Usage(format!("--{flag}: {e}")))
}
