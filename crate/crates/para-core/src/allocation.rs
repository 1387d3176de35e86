//! Threshold selection policies over the pooled spectrum.
//!
//! Every policy produces a [`KeepPlan`]: a per-layer boolean mask over
//! singular-value positions. The two global policies pick a single threshold
//! across the whole set; the two ablation selectors exist to quantify what
//! that buys.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

use crate::adapter::LayerKey;
use crate::spectral::{
    collect_entries, pool_order, GlobalSpectrum, SpectralDecomposition, SpectrumEntry,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AllocationError {
    #[error("{param} must lie in (0, 1], got {value}")]
    Domain { param: &'static str, value: f64 },
    #[error("every pooled singular value is zero; energy policy is undefined")]
    Degenerate,
    #[error("k = {k} is out of range for a budget of {budget}")]
    KOutOfRange { k: usize, budget: usize },
}

/// Which singular-value positions each layer keeps.
///
/// `threshold` is the global cutoff for the threshold policies and NaN for
/// the selectors where no single cutoff exists (serialized as null).
#[derive(Debug, Clone)]
pub struct KeepPlan {
    pub threshold: f64,
    keep: BTreeMap<LayerKey, Vec<bool>>,
    pub kept_total: usize,
    pub retained_energy_fraction: f64,
}

impl KeepPlan {
    pub fn mask(&self, key: &LayerKey) -> Option<&[bool]> {
        self.keep.get(key).map(|m| m.as_slice())
    }

    pub fn masks(&self) -> impl Iterator<Item = (&LayerKey, &[bool])> {
        self.keep.iter().map(|(k, m)| (k, m.as_slice()))
    }

    pub fn n_layers(&self) -> usize {
        self.keep.len()
    }

    /// The threshold, or None when the plan was not built from one.
    pub fn threshold_opt(&self) -> Option<f64> {
        if self.threshold.is_nan() {
            None
        } else {
            Some(self.threshold)
        }
    }

    /// True if `other` keeps every position this plan keeps.
    pub fn is_subset_of(&self, other: &KeepPlan) -> bool {
        self.keep
            .iter()
            .all(|(key, mask)| match other.keep.get(key) {
                Some(big) if big.len() == mask.len() => {
                    mask.iter().zip(big).all(|(small, big)| !*small || *big)
                }
                _ => false,
            })
    }
}

/// Empty all-false masks shaped like the pooled entries.
fn blank_masks(entries: &[SpectrumEntry]) -> BTreeMap<LayerKey, Vec<bool>> {
    let mut lengths: BTreeMap<LayerKey, usize> = BTreeMap::new();
    for e in entries {
        let len = lengths.entry(e.key.clone()).or_insert(0);
        *len = (*len).max(e.position + 1);
    }
    lengths
        .into_iter()
        .map(|(k, len)| (k, vec![false; len]))
        .collect()
}

fn energy_of(entries: &[SpectrumEntry]) -> f64 {
    entries.iter().map(|e| e.value * e.value).sum()
}

fn plan_from_prefix(entries: &[SpectrumEntry], kept: usize, threshold: f64) -> KeepPlan {
    let mut keep = blank_masks(entries);
    let mut kept_energy = 0.0;
    for e in &entries[..kept] {
        keep.get_mut(&e.key).expect("mask exists for every entry")[e.position] = true;
        kept_energy += e.value * e.value;
    }
    let total = energy_of(entries);
    let retained_energy_fraction = if total > 0.0 {
        kept_energy / total
    } else {
        1.0
    };
    KeepPlan {
        threshold,
        keep,
        kept_total: kept,
        retained_energy_fraction,
    }
}

/// Budget policy: keep exactly `round(gamma * B_init)` values.
///
/// The reported threshold is the value at that descending index. Duplicated
/// values straddling the cut are resolved by the deterministic pool order,
/// so the kept count is exact even under ties.
pub fn threshold_gamma(spectrum: &GlobalSpectrum, gamma: f64) -> Result<KeepPlan, AllocationError> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(AllocationError::Domain {
            param: "gamma",
            value: gamma,
        });
    }
    let entries = spectrum.entries();
    let b_init = entries.len();
    // Round half up; stays within [0, b_init] because gamma <= 1.
    let b_tgt = (gamma * b_init as f64 + 0.5) as usize;
    let threshold = if b_tgt == 0 {
        f64::INFINITY
    } else {
        entries[b_tgt - 1].value
    };
    Ok(plan_from_prefix(entries, b_tgt, threshold))
}

/// Energy policy: keep the minimal descending prefix whose squared sum
/// reaches `epsilon` of the total. Zero values carry no energy and are
/// never retained, even at epsilon = 1.
pub fn threshold_epsilon(
    spectrum: &GlobalSpectrum,
    epsilon: f64,
) -> Result<KeepPlan, AllocationError> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(AllocationError::Domain {
            param: "epsilon",
            value: epsilon,
        });
    }
    let entries = spectrum.entries();
    let total = energy_of(entries);
    if total == 0.0 {
        return Err(AllocationError::Degenerate);
    }
    let target = epsilon * total;
    let mut acc = 0.0;
    let mut kept = 0;
    while acc < target && kept < entries.len() {
        acc += entries[kept].value * entries[kept].value;
        kept += 1;
    }
    let threshold = entries[kept - 1].value;
    Ok(plan_from_prefix(entries, kept, threshold))
}

/// Ablation: every layer independently keeps its `r_local` largest values.
/// No global threshold exists, so `threshold` is NaN.
pub fn local_uniform_plan(decomps: &[SpectralDecomposition], r_local: usize) -> KeepPlan {
    let mut keep = BTreeMap::new();
    let mut kept_total = 0;
    let mut kept_energy = 0.0;
    let mut total_energy = 0.0;
    for d in decomps {
        let take = r_local.min(d.original_rank);
        let mut mask = vec![false; d.original_rank];
        for (i, m) in mask.iter_mut().enumerate().take(take) {
            *m = true;
            kept_energy += d.sigma[i] * d.sigma[i];
        }
        total_energy += d.energy();
        kept_total += take;
        keep.insert(d.key.clone(), mask);
    }
    let retained_energy_fraction = if total_energy > 0.0 {
        kept_energy / total_energy
    } else {
        1.0
    };
    KeepPlan {
        threshold: f64::NAN,
        keep,
        kept_total,
        retained_energy_fraction,
    }
}

/// Reverse ablation: drop the `k` globally largest values and keep the rest.
pub fn drop_top_k_plan(
    decomps: &[SpectralDecomposition],
    k: usize,
) -> Result<KeepPlan, AllocationError> {
    let mut entries = collect_entries(decomps);
    entries.sort_by(pool_order);
    let budget = entries.len();
    if k > budget {
        return Err(AllocationError::KOutOfRange { k, budget });
    }
    let mut keep = blank_masks(&entries);
    let mut kept_energy = 0.0;
    for e in &entries[k..] {
        keep.get_mut(&e.key).expect("mask exists for every entry")[e.position] = true;
        kept_energy += e.value * e.value;
    }
    let total = energy_of(&entries);
    let retained_energy_fraction = if total > 0.0 {
        kept_energy / total
    } else {
        1.0
    };
    Ok(KeepPlan {
        threshold: f64::NAN,
        keep,
        kept_total: budget - k,
        retained_energy_fraction,
    })
}
