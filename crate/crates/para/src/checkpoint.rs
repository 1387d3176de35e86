//! Loading and saving adapter checkpoint directories.
//!
//! A checkpoint directory holds `adapter_model.safetensors` plus
//! `adapter_config.json`. Tensor pairs `<prefix>.lora_A.weight` (r x d2) and
//! `<prefix>.lora_B.weight` (d1 x r) become one adapter layer each; the
//! per-layer scale is alpha / r with `alpha_pattern` overrides honored.

use std::collections::BTreeMap;
use std::path::Path;

use para_core::{AdapterLayer, AdapterSet, LayerKey, LayerType, Matrix};

use crate::config::AdapterConfig;
use crate::dtype;
use crate::error::AdapterIoError;
use crate::logging::log_warn;
use crate::safetensors::{self, OwnedTensor};

pub const TENSOR_FILE: &str = "adapter_model.safetensors";
pub const CONFIG_FILE: &str = "adapter_config.json";

const LORA_A_SUFFIX: &str = ".lora_A.weight";
const LORA_B_SUFFIX: &str = ".lora_B.weight";

/// Maps the trailing module-name segment of a tensor prefix to a layer
/// type. Backbone naming varies, so the table is replaceable; the default
/// covers the common attention/MLP conventions.
#[derive(Debug, Clone)]
pub struct ModuleTypeMap {
    rules: Vec<(&'static str, LayerType)>,
}

impl Default for ModuleTypeMap {
    fn default() -> Self {
        Self {
            rules: vec![
                ("q_proj", LayerType::Q),
                ("k_proj", LayerType::K),
                ("v_proj", LayerType::V),
                ("o_proj", LayerType::O),
                ("up_proj", LayerType::M1),
                ("fc1", LayerType::M1),
                ("down_proj", LayerType::M2),
                ("fc2", LayerType::M2),
            ],
        }
    }
}

impl ModuleTypeMap {
    pub fn classify(&self, prefix: &str) -> Option<LayerType> {
        let last = prefix.rsplit('.').next()?;
        self.rules
            .iter()
            .find(|(name, _)| *name == last)
            .map(|(_, t)| *t)
    }
}

/// 1-based block index parsed from the last integer path segment; tensor
/// names count blocks from zero.
fn parse_layer_index(prefix: &str) -> Option<usize> {
    prefix
        .split('.')
        .rev()
        .find_map(|seg| seg.parse::<usize>().ok())
        .map(|raw| raw + 1)
}

/// A loaded checkpoint: the usable adapter set plus any tensor prefixes that
/// were skipped (non-2D adapters and unrelated tensors).
#[derive(Debug)]
pub struct LoadedAdapter {
    pub set: AdapterSet,
    pub skipped: Vec<String>,
}

pub fn load_adapter(dir: &Path) -> Result<LoadedAdapter, AdapterIoError> {
    load_adapter_with(dir, &ModuleTypeMap::default())
}

pub fn load_adapter_with(
    dir: &Path,
    type_map: &ModuleTypeMap,
) -> Result<LoadedAdapter, AdapterIoError> {
    let tensor_bytes = std::fs::read(dir.join(TENSOR_FILE))?;
    let config_bytes = std::fs::read(dir.join(CONFIG_FILE))?;
    let config = AdapterConfig::from_json(&config_bytes)?;
    let tensors = safetensors::parse(&tensor_bytes)?;

    // Group tensors by prefix.
    let mut pairs: BTreeMap<String, (Option<OwnedTensor>, Option<OwnedTensor>)> = BTreeMap::new();
    let mut skipped = Vec::new();
    for (name, tensor) in tensors {
        if let Some(prefix) = name.strip_suffix(LORA_A_SUFFIX) {
            pairs.entry(prefix.to_string()).or_default().0 = Some(tensor);
        } else if let Some(prefix) = name.strip_suffix(LORA_B_SUFFIX) {
            pairs.entry(prefix.to_string()).or_default().1 = Some(tensor);
        } else {
            skipped.push(name);
        }
    }

    let mut layers = Vec::new();
    for (prefix, (a, b)) in pairs {
        let (Some(a), Some(b)) = (&a, &b) else {
            let missing = if a.is_none() { "lora_A" } else { "lora_B" };
            return Err(AdapterIoError::Pairing(format!(
                "'{prefix}' is missing its {missing} tensor"
            )));
        };
        if a.shape.len() != 2 || b.shape.len() != 2 {
            // Only 2-D weight adapters are handled; anything else is
            // reported as skipped rather than rejected.
            skipped.push(prefix.clone());
            continue;
        }
        let rank = a.shape[0];
        let d2 = a.shape[1];
        let d1 = b.shape[0];
        if b.shape[1] != rank {
            return Err(AdapterIoError::Pairing(format!(
                "'{prefix}': lora_B is {d1}x{} but lora_A has rank {rank}",
                b.shape[1]
            )));
        }
        if rank == 0 || rank > d1.min(d2) {
            return Err(AdapterIoError::Pairing(format!(
                "'{prefix}': rank {rank} is invalid for a {d1}x{d2} update"
            )));
        }
        if a.dtype != b.dtype {
            return Err(AdapterIoError::Pairing(format!(
                "'{prefix}': lora_A is {} but lora_B is {}",
                a.dtype, b.dtype
            )));
        }

        let layer_type = type_map
            .classify(&prefix)
            .ok_or_else(|| AdapterIoError::UnknownLayerType(prefix.clone()))?;
        let layer_index = parse_layer_index(&prefix).ok_or_else(|| {
            AdapterIoError::Format(format!("'{prefix}': no layer index in module path"))
        })?;

        let alpha = AdapterConfig::pattern_lookup(&config.alpha_pattern, &prefix)
            .copied()
            .unwrap_or(config.lora_alpha);
        let scale = alpha / rank as f64;

        let a_matrix = Matrix::new(rank, d2, dtype::decode(&a.data, a.dtype))
            .map_err(|e| AdapterIoError::Format(format!("'{prefix}' lora_A: {e}")))?;
        let b_matrix = Matrix::new(d1, rank, dtype::decode(&b.data, b.dtype))
            .map_err(|e| AdapterIoError::Format(format!("'{prefix}' lora_B: {e}")))?;

        let key = LayerKey {
            layer_index,
            layer_type,
            module_path: prefix.clone(),
        };
        let layer = AdapterLayer::new(key, b_matrix, a_matrix, scale, a.dtype)
            .map_err(|e| AdapterIoError::Format(format!("'{prefix}': {e}")))?;
        layers.push(layer);
    }

    if layers.is_empty() {
        return Err(AdapterIoError::Format(
            "checkpoint contains no usable adapter tensor pairs".to_string(),
        ));
    }

    let set = AdapterSet::new(layers, config.r, config.lora_alpha)
        .map_err(|e| AdapterIoError::Format(e.to_string()))?;

    if !skipped.is_empty() {
        log_warn!("skipped {} non-adapter tensor(s)", skipped.len());
    }

    Ok(LoadedAdapter { set, skipped })
}

pub fn save_adapter(set: &AdapterSet, dir: &Path) -> Result<(), AdapterIoError> {
    if set.layers().is_empty() {
        return Err(AdapterIoError::EmptySet);
    }

    let mut tensors = BTreeMap::new();
    let mut rank_pattern = BTreeMap::new();
    let mut alpha_pattern = BTreeMap::new();
    let mut target_modules: Vec<String> = Vec::new();

    for layer in set.layers() {
        let prefix = &layer.key().module_path;
        let dtype = layer.storage_dtype();
        let (d1, d2) = layer.dims();
        let rank = layer.rank();

        tensors.insert(
            format!("{prefix}{LORA_B_SUFFIX}"),
            OwnedTensor {
                dtype,
                shape: vec![d1, rank],
                data: dtype::encode(layer.b().data(), dtype),
            },
        );
        tensors.insert(
            format!("{prefix}{LORA_A_SUFFIX}"),
            OwnedTensor {
                dtype,
                shape: vec![rank, d2],
                data: dtype::encode(layer.a().data(), dtype),
            },
        );

        if rank != set.init_rank() {
            rank_pattern.insert(prefix.clone(), rank);
        }
        let layer_alpha = layer.scale() * rank as f64;
        if layer_alpha != set.alpha() {
            alpha_pattern.insert(prefix.clone(), layer_alpha);
        }
        if let Some(last) = prefix.rsplit('.').next() {
            if !target_modules.iter().any(|m| m == last) {
                target_modules.push(last.to_string());
            }
        }
    }
    target_modules.sort();

    let config = AdapterConfig {
        r: set.init_rank(),
        lora_alpha: set.alpha(),
        rank_pattern,
        alpha_pattern,
        target_modules,
    };

    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(TENSOR_FILE), safetensors::serialize(&tensors))?;
    std::fs::write(dir.join(CONFIG_FILE), config.to_json())?;
    Ok(())
}
