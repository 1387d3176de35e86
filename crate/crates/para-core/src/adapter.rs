//! Data model for a set of trained low-rank adapter pairs.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdapterError {
    #[error("b has {b_cols} columns but a has {a_rows} rows; both must equal the rank")]
    FactorMismatch { b_cols: usize, a_rows: usize },
    #[error("rank {rank} exceeds min(d1, d2) = {min_dim}")]
    RankExceedsDims { rank: usize, min_dim: usize },
    #[error("scale must be finite and non-negative, got {0}")]
    InvalidScale(f64),
    #[error("duplicate adapter for layer {index} type {layer_type}")]
    DuplicateKey { index: usize, layer_type: LayerType },
    #[error("rank must be at least 1 and at most min(d1, d2) = {min_dim}")]
    InvalidRank { min_dim: usize },
    #[error("layer count must be at least 1")]
    NoLayers,
    #[error("bimodal big_count {big_count} exceeds the layer count {n_layers}")]
    BigCountTooLarge { big_count: usize, n_layers: usize },
    #[error("spectrum profile parameter {name} must be finite and non-negative, got {value}")]
    InvalidProfile { name: &'static str, value: f64 },
}

/// The six adapted weight types per transformer block: the four attention
/// projections and the two MLP matrices. Declaration order is the canonical
/// ordering used to break ties deterministically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerType {
    Q,
    K,
    V,
    O,
    M1,
    M2,
}

impl LayerType {
    pub const ALL: [LayerType; 6] = [
        LayerType::Q,
        LayerType::K,
        LayerType::V,
        LayerType::O,
        LayerType::M1,
        LayerType::M2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LayerType::Q => "q",
            LayerType::K => "k",
            LayerType::V => "v",
            LayerType::O => "o",
            LayerType::M1 => "m1",
            LayerType::M2 => "m2",
        }
    }

    /// Position in the canonical ordering.
    pub fn ordinal(self) -> usize {
        self as usize
    }
}

impl fmt::Display for LayerType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// On-disk element type of an adapter tensor. All arithmetic happens in f64
/// regardless; this only controls how values are stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum StorageDtype {
    F32,
    F16,
    Bf16,
}

impl StorageDtype {
    pub fn as_str(self) -> &'static str {
        match self {
            StorageDtype::F32 => "F32",
            StorageDtype::F16 => "F16",
            StorageDtype::Bf16 => "BF16",
        }
    }

    pub fn byte_width(self) -> usize {
        match self {
            StorageDtype::F32 => 4,
            StorageDtype::F16 | StorageDtype::Bf16 => 2,
        }
    }
}

impl fmt::Display for StorageDtype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Identity of one adapter within a set. `layer_index` is 1-based;
/// `module_path` is the tensor-name prefix as found in the checkpoint.
///
/// The derived ordering is (layer_index, layer_type, module_path), which is
/// exactly the tie order used everywhere a deterministic ranking is needed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LayerKey {
    pub layer_index: usize,
    pub layer_type: LayerType,
    pub module_path: String,
}

impl fmt::Display for LayerKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "layer {} type {} ({})",
            self.layer_index, self.layer_type, self.module_path
        )
    }
}

/// One trained adapter pair. The effective weight update is
/// `scale * b * a` with `b` of shape d1 x r and `a` of shape r x d2.
#[derive(Debug, Clone, PartialEq)]
pub struct AdapterLayer {
    key: LayerKey,
    b: Matrix,
    a: Matrix,
    scale: f64,
    storage_dtype: StorageDtype,
}

impl AdapterLayer {
    pub fn new(
        key: LayerKey,
        b: Matrix,
        a: Matrix,
        scale: f64,
        storage_dtype: StorageDtype,
    ) -> Result<Self, AdapterError> {
        if b.cols() != a.rows() {
            return Err(AdapterError::FactorMismatch {
                b_cols: b.cols(),
                a_rows: a.rows(),
            });
        }
        let rank = b.cols();
        let min_dim = b.rows().min(a.cols());
        if rank > min_dim {
            return Err(AdapterError::RankExceedsDims { rank, min_dim });
        }
        if !scale.is_finite() || scale < 0.0 {
            return Err(AdapterError::InvalidScale(scale));
        }
        Ok(Self {
            key,
            b,
            a,
            scale,
            storage_dtype,
        })
    }

    pub fn key(&self) -> &LayerKey {
        &self.key
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn rank(&self) -> usize {
        self.b.cols()
    }

    /// (d1, d2) of the adapted weight.
    pub fn dims(&self) -> (usize, usize) {
        (self.b.rows(), self.a.cols())
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn storage_dtype(&self) -> StorageDtype {
        self.storage_dtype
    }
}

/// An adapter checkpoint: every trained pair plus checkpoint-level metadata.
///
/// Layers are held sorted by key, so every walk over a set is deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct AdapterSet {
    layers: Vec<AdapterLayer>,
    init_rank: usize,
    alpha: f64,
}

impl AdapterSet {
    pub fn new(
        mut layers: Vec<AdapterLayer>,
        init_rank: usize,
        alpha: f64,
    ) -> Result<Self, AdapterError> {
        layers.sort_by(|x, y| x.key.cmp(&y.key));
        for pair in layers.windows(2) {
            if pair[0].key.layer_index == pair[1].key.layer_index
                && pair[0].key.layer_type == pair[1].key.layer_type
            {
                return Err(AdapterError::DuplicateKey {
                    index: pair[0].key.layer_index,
                    layer_type: pair[0].key.layer_type,
                });
            }
        }
        Ok(Self {
            layers,
            init_rank,
            alpha,
        })
    }

    pub fn layers(&self) -> &[AdapterLayer] {
        &self.layers
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    /// Uniform training rank, when the checkpoint declares one.
    pub fn init_rank(&self) -> usize {
        self.init_rank
    }

    /// Checkpoint-level LoRA alpha.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Total rank budget: the sum of all per-layer ranks.
    pub fn initial_budget(&self) -> usize {
        self.layers.iter().map(|l| l.rank()).sum()
    }

    pub fn find(&self, index: usize, layer_type: LayerType) -> Option<&AdapterLayer> {
        self.layers
            .iter()
            .find(|l| l.key.layer_index == index && l.key.layer_type == layer_type)
    }
}
