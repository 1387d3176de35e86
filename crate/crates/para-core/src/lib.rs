//! Spectral compression kernels for low-rank adapter pairs.
//!
//! A trained adapter layer is a pair `(b, a)` whose effective weight update
//! is `scale * b * a`. This crate computes each layer's singular value
//! decomposition entirely inside the rank-r subspace (QR of both factors,
//! SVD of the r x r interaction matrix), pools the singular values of a
//! whole adapter set, selects a keep set under a budget or energy policy,
//! and rebuilds compacted pairs with heterogeneous ranks.
//!
//! The crate is `no_std` with `alloc`; file formats, parallel drivers and
//! the CLI live in the companion `para` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

mod math;
mod rng;

pub mod adapter;
pub mod allocation;
pub mod matrix;
pub mod oracle;
pub mod qr;
pub mod reconstruct;
pub mod report;
pub mod spectral;
pub mod svd;
pub mod synth;

pub use adapter::{AdapterError, AdapterLayer, AdapterSet, LayerKey, LayerType, StorageDtype};
pub use allocation::{
    drop_top_k_plan, local_uniform_plan, threshold_epsilon, threshold_gamma, AllocationError,
    KeepPlan,
};
pub use matrix::{LinalgError, Matrix};
pub use oracle::{
    frobenius_distance, materialize_update, oracle_svd, OracleDecomposition, OracleError,
    MATERIALIZE_LIMIT,
};
pub use qr::{householder_qr, QrFactors};
pub use reconstruct::{compress, prune_and_reconstruct, CompressedLayer, ReconstructError};
pub use report::{CompressionReport, LayerReport, ReportTotals};
pub use spectral::{
    decompose_layer, pool_spectrum, GlobalSpectrum, SpectralDecomposition, SpectralError,
    SpectrumEntry,
};
pub use svd::{svd_square, SvdFactors, SVD_SIDE_LIMIT};
pub use synth::{generate_synthetic, SpectrumProfile};
