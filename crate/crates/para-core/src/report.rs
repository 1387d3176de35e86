//! Serializable summary of one compression run.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;
use serde::{Deserialize, Serialize};

use crate::adapter::LayerType;

/// Per-layer outcome row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerReport {
    pub layer_index: usize,
    pub layer_type: LayerType,
    pub module_path: String,
    pub original_rank: usize,
    pub new_rank: usize,
    /// Fraction of this layer's squared spectrum that survived.
    pub retained_energy: f64,
    /// Exact Frobenius error sqrt(sum of dropped sigma^2).
    pub frobenius_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTotals {
    pub b_init: usize,
    pub kept_total: usize,
    pub parameter_count_before: usize,
    pub parameter_count_after: usize,
    pub reduction_fraction: f64,
    pub retained_energy_fraction: f64,
}

/// Full report: threshold, per-layer rows, totals and the rank grid
/// (one row per transformer block, one column per layer type in canonical
/// order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionReport {
    /// Global threshold, or None for selectors without one.
    pub threshold: Option<f64>,
    pub per_layer: Vec<LayerReport>,
    pub totals: ReportTotals,
    pub rank_matrix: Vec<Vec<usize>>,
}

impl CompressionReport {
    /// One CSV row per layer, ready for plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "layer_index,layer_type,module_path,original_rank,new_rank,retained_energy,frobenius_error\n",
        );
        for row in &self.per_layer {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                row.layer_index,
                row.layer_type,
                row.module_path,
                row.original_rank,
                row.new_rank,
                row.retained_energy,
                row.frobenius_error
            );
        }
        out
    }

    pub fn layer(&self, layer_index: usize, layer_type: LayerType) -> Option<&LayerReport> {
        self.per_layer
            .iter()
            .find(|r| r.layer_index == layer_index && r.layer_type == layer_type)
    }
}
