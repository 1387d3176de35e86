//! Per-layer SVD of `scale * b * a` computed inside the rank-r subspace,
//! plus pooling of all singular values into one globally ordered spectrum.
//!
//! The update matrix is never materialized: QR of `b` and of `a^T` reduces
//! the problem to an r x r interaction matrix whose SVD lifts back through
//! the orthonormal Q factors. Cost is O((d1 + d2) r^2 + r^3).

use alloc::vec::Vec;
use core::cmp::Ordering;
use thiserror::Error;

use crate::adapter::{AdapterLayer, LayerKey};
use crate::matrix::{LinalgError, Matrix};
use crate::qr::householder_qr;
use crate::svd::svd_square;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("cannot pool an empty collection of decompositions")]
    EmptyInput,
    #[error("spectrum value at position {0} is negative or not finite")]
    InvalidValue(usize),
}

/// Compact SVD of one layer's effective update: `u * diag(sigma) * v^T`
/// equals `scale * b * a`, with `sigma` sorted descending and the scale
/// already folded in.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub key: LayerKey,
    /// d1 x r, orthonormal columns.
    pub u: Matrix,
    /// Effective singular values, length r, non-increasing.
    pub sigma: Vec<f64>,
    /// d2 x r, orthonormal columns.
    pub v: Matrix,
    pub original_rank: usize,
}

impl SpectralDecomposition {
    /// (d1, d2) of the decomposed update.
    pub fn dims(&self) -> (usize, usize) {
        (self.u.rows(), self.v.rows())
    }

    /// Sum of squared singular values.
    pub fn energy(&self) -> f64 {
        self.sigma.iter().map(|s| s * s).sum()
    }
}

/// QR-route SVD of a single adapter layer.
pub fn decompose_layer(layer: &AdapterLayer) -> Result<SpectralDecomposition, SpectralError> {
    let qr_b = householder_qr(layer.b())?;
    let qr_a = householder_qr(&layer.a().transpose())?;

    // r x r interaction matrix between the two triangular factors.
    let interaction = qr_b.r_upper.matmul(&qr_a.r_upper.transpose())?;
    let small = svd_square(&interaction)?;

    let u = qr_b.q.matmul(&small.u)?;
    let v = qr_a.q.matmul(&small.v)?;
    let scale = layer.scale();
    let sigma: Vec<f64> = small.sigma.iter().map(|s| s * scale).collect();

    Ok(SpectralDecomposition {
        key: layer.key().clone(),
        u,
        sigma,
        v,
        original_rank: layer.rank(),
    })
}

/// One pooled singular value with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEntry {
    pub value: f64,
    pub key: LayerKey,
    /// Index of the value within its layer's descending spectrum.
    pub position: usize,
}

/// Compare two entries in global pool order: by value descending, ties by
/// (layer_index, layer_type, position). Total and deterministic.
pub(crate) fn pool_order(a: &SpectrumEntry, b: &SpectrumEntry) -> Ordering {
    b.value
        .partial_cmp(&a.value)
        .expect("spectrum values are finite")
        .then_with(|| a.key.layer_index.cmp(&b.key.layer_index))
        .then_with(|| a.key.layer_type.cmp(&b.key.layer_type))
        .then_with(|| a.position.cmp(&b.position))
}

/// All singular values of a set, sorted in the global pool order.
#[derive(Debug, Clone)]
pub struct GlobalSpectrum {
    entries: Vec<SpectrumEntry>,
}

impl GlobalSpectrum {
    /// Build a spectrum from loose entries; sorts and validates them.
    pub fn from_entries(mut entries: Vec<SpectrumEntry>) -> Result<Self, SpectralError> {
        if entries.is_empty() {
            return Err(SpectralError::EmptyInput);
        }
        for (i, e) in entries.iter().enumerate() {
            if !e.value.is_finite() || e.value < 0.0 {
                return Err(SpectralError::InvalidValue(i));
            }
        }
        entries.sort_by(pool_order);
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[SpectrumEntry] {
        &self.entries
    }

    /// Total budget: the number of pooled values.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sum of squared values, accumulated in pool order.
    pub fn total_energy(&self) -> f64 {
        self.entries.iter().map(|e| e.value * e.value).sum()
    }
}

pub(crate) fn collect_entries(decomps: &[SpectralDecomposition]) -> Vec<SpectrumEntry> {
    let mut entries = Vec::with_capacity(decomps.iter().map(|d| d.sigma.len()).sum());
    for decomp in decomps {
        for (position, &value) in decomp.sigma.iter().enumerate() {
            entries.push(SpectrumEntry {
                value,
                key: decomp.key.clone(),
                position,
            });
        }
    }
    entries
}

/// Pool every singular value of every decomposition into one ordered
/// spectrum. The result length equals the set's total rank budget.
pub fn pool_spectrum(decomps: &[SpectralDecomposition]) -> Result<GlobalSpectrum, SpectralError> {
    if decomps.is_empty() {
        return Err(SpectralError::EmptyInput);
    }
    GlobalSpectrum::from_entries(collect_entries(decomps))
}
