//! Pruning and reconstruction: turn a keep plan into compacted (b, a) pairs
//! and a compression report.

use alloc::vec::Vec;
use thiserror::Error;

use crate::adapter::{LayerKey, LayerType};
use crate::allocation::KeepPlan;
use crate::math::sqrt;
use crate::matrix::Matrix;
use crate::report::{CompressionReport, LayerReport, ReportTotals};
use crate::spectral::SpectralDecomposition;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReconstructError {
    #[error("mask length {got} does not match original rank {expected}")]
    MaskLength { expected: usize, got: usize },
    #[error("keep plan has no mask for layer {key}")]
    PlanMissingLayer { key: LayerKey },
    #[error("keep plan covers {plan_layers} layers but the set has {set_layers}")]
    PlanLayerCount {
        plan_layers: usize,
        set_layers: usize,
    },
}

/// One compacted layer. Factors are absent when every position was pruned.
/// The stored factors carry the effective update directly: `b_hat * a_hat`
/// is the rank-`new_rank` truncation of `scale * b * a`.
#[derive(Debug, Clone)]
pub struct CompressedLayer {
    pub key: LayerKey,
    pub b_hat: Option<Matrix>,
    pub a_hat: Option<Matrix>,
    pub new_rank: usize,
    /// Exact Frobenius error of the pruned update: sqrt of the sum of the
    /// dropped squared singular values.
    pub frobenius_error: f64,
}

/// Drop the masked-out singular triplets and rebuild the pair.
///
/// Kept positions are physically compacted, not zero-masked; exact-zero
/// singular values are compacted away as well since they contribute
/// nothing. The square root of each kept value is split symmetrically:
/// column i of `b_hat` and row i of `a_hat` both have norm sqrt(sigma_i).
pub fn prune_and_reconstruct(
    decomp: &SpectralDecomposition,
    mask: &[bool],
) -> Result<CompressedLayer, ReconstructError> {
    if mask.len() != decomp.original_rank {
        return Err(ReconstructError::MaskLength {
            expected: decomp.original_rank,
            got: mask.len(),
        });
    }

    let kept: Vec<usize> = (0..decomp.original_rank)
        .filter(|&i| mask[i] && decomp.sigma[i] > 0.0)
        .collect();

    let dropped_energy: f64 = (0..decomp.original_rank)
        .filter(|&i| !mask[i])
        .map(|i| decomp.sigma[i] * decomp.sigma[i])
        .sum();
    let frobenius_error = sqrt(dropped_energy);

    if kept.is_empty() {
        return Ok(CompressedLayer {
            key: decomp.key.clone(),
            b_hat: None,
            a_hat: None,
            new_rank: 0,
            frobenius_error,
        });
    }

    let (d1, d2) = decomp.dims();
    let new_rank = kept.len();
    let mut b_hat = Matrix::zeros(d1, new_rank);
    let mut a_hat = Matrix::zeros(new_rank, d2);
    for (slot, &src) in kept.iter().enumerate() {
        let root = sqrt(decomp.sigma[src]);
        for i in 0..d1 {
            b_hat.set(i, slot, decomp.u.get(i, src) * root);
        }
        for j in 0..d2 {
            a_hat.set(slot, j, root * decomp.v.get(j, src));
        }
    }

    Ok(CompressedLayer {
        key: decomp.key.clone(),
        b_hat: Some(b_hat),
        a_hat: Some(a_hat),
        new_rank,
        frobenius_error,
    })
}

/// Apply a keep plan to every decomposition and assemble the report.
///
/// The plan must cover exactly the decomposed layers. Output layers are
/// sorted by key.
pub fn compress(
    decomps: &[SpectralDecomposition],
    plan: &KeepPlan,
) -> Result<(Vec<CompressedLayer>, CompressionReport), ReconstructError> {
    if plan.n_layers() != decomps.len() {
        return Err(ReconstructError::PlanLayerCount {
            plan_layers: plan.n_layers(),
            set_layers: decomps.len(),
        });
    }

    let mut order: Vec<usize> = (0..decomps.len()).collect();
    order.sort_by(|&x, &y| decomps[x].key.cmp(&decomps[y].key));

    let mut layers = Vec::with_capacity(decomps.len());
    let mut rows = Vec::with_capacity(decomps.len());
    let mut params_before = 0usize;
    let mut params_after = 0usize;
    let mut kept_ranks = 0usize;
    let mut b_init = 0usize;
    let mut energy_total = 0.0;
    let mut energy_kept = 0.0;
    let mut max_index = 0usize;

    for &idx in &order {
        let decomp = &decomps[idx];
        let mask = plan
            .mask(&decomp.key)
            .ok_or_else(|| ReconstructError::PlanMissingLayer {
                key: decomp.key.clone(),
            })?;
        let compressed = prune_and_reconstruct(decomp, mask)?;

        let (d1, d2) = decomp.dims();
        params_before += decomp.original_rank * (d1 + d2);
        params_after += compressed.new_rank * (d1 + d2);
        kept_ranks += compressed.new_rank;
        b_init += decomp.original_rank;
        max_index = max_index.max(decomp.key.layer_index);

        let layer_energy = decomp.energy();
        let layer_kept: f64 = (0..decomp.original_rank)
            .filter(|&i| mask[i])
            .map(|i| decomp.sigma[i] * decomp.sigma[i])
            .sum();
        energy_total += layer_energy;
        energy_kept += layer_kept;

        rows.push(LayerReport {
            layer_index: decomp.key.layer_index,
            layer_type: decomp.key.layer_type,
            module_path: decomp.key.module_path.clone(),
            original_rank: decomp.original_rank,
            new_rank: compressed.new_rank,
            retained_energy: if layer_energy > 0.0 {
                layer_kept / layer_energy
            } else {
                1.0
            },
            frobenius_error: compressed.frobenius_error,
        });
        layers.push(compressed);
    }

    let mut rank_matrix = alloc::vec![alloc::vec![0usize; LayerType::ALL.len()]; max_index];
    for row in &rows {
        rank_matrix[row.layer_index - 1][row.layer_type.ordinal()] = row.new_rank;
    }

    let report = CompressionReport {
        threshold: plan.threshold_opt(),
        per_layer: rows,
        totals: ReportTotals {
            b_init,
            kept_total: kept_ranks,
            parameter_count_before: params_before,
            parameter_count_after: params_after,
            reduction_fraction: if params_before > 0 {
                1.0 - params_after as f64 / params_before as f64
            } else {
                0.0
            },
            retained_energy_fraction: if energy_total > 0.0 {
                energy_kept / energy_total
            } else {
                1.0
            },
        },
        rank_matrix,
    };

    Ok((layers, report))
}
