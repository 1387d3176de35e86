//! The adapter configuration JSON that travels next to the tensor file.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::AdapterIoError;

/// Keys consumed and produced: `r`, `lora_alpha`, `rank_pattern`,
/// `alpha_pattern`, `target_modules`. Anything else in a foreign config is
/// ignored on read and not written back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterConfig {
    pub r: usize,
    pub lora_alpha: f64,
    #[serde(default)]
    pub rank_pattern: BTreeMap<String, usize>,
    #[serde(default)]
    pub alpha_pattern: BTreeMap<String, f64>,
    #[serde(default)]
    pub target_modules: Vec<String>,
}

impl AdapterConfig {
    pub fn from_json(bytes: &[u8]) -> Result<Self, AdapterIoError> {
        serde_json::from_slice(bytes)
            .map_err(|e| AdapterIoError::Format(format!("adapter config: {e}")))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// Per-module override lookup: exact match on the full tensor-name
    /// prefix, else a dot-boundary suffix match (the way foreign configs
    /// usually key their patterns).
    pub fn pattern_lookup<'a, T>(map: &'a BTreeMap<String, T>, prefix: &str) -> Option<&'a T> {
        if let Some(v) = map.get(prefix) {
            return Some(v);
        }
        map.iter()
            .find(|(k, _)| prefix.ends_with(&format!(".{k}")))
            .map(|(_, v)| v)
    }
}
