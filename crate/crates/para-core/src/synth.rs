//! Synthetic adapter sets with planted singular spectra.
//!
//! Each layer is built as `U * diag(sigma) * V^T` from random orthonormal
//! factors and split symmetrically into the (b, a) pair, so the singular
//! values of `b * a` are known exactly by construction. This is what lets
//! desk-scale tests pin down thresholding behaviour without trained weights.

#![allow(clippy::needless_range_loop)]

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::adapter::{AdapterError, AdapterLayer, AdapterSet, LayerKey, LayerType, StorageDtype};
use crate::math::sqrt;
use crate::matrix::Matrix;
use crate::qr::householder_qr;
use crate::rng::SplitMix64;

/// Shape of the planted per-layer spectrum.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectrumProfile {
    /// Every singular value is 1.
    Flat,
    /// sigma_j = decay^j for j = 0..rank; a long-tailed spectrum for decay < 1.
    PowerLaw { decay: f64 },
    /// The first `big_count` layers carry a flat spectrum at `big_val`, the
    /// remaining layers one at `small_val`. Pooled over the set this gives a
    /// two-mode distribution with a known gap.
    Bimodal {
        big_count: usize,
        big_val: f64,
        small_val: f64,
    },
}

impl SpectrumProfile {
    fn validate(&self, n_layers: usize) -> Result<(), AdapterError> {
        match *self {
            SpectrumProfile::Flat => Ok(()),
            SpectrumProfile::PowerLaw { decay } => {
                if !decay.is_finite() || decay <= 0.0 {
                    return Err(AdapterError::InvalidProfile {
                        name: "decay",
                        value: decay,
                    });
                }
                Ok(())
            }
            SpectrumProfile::Bimodal {
                big_count,
                big_val,
                small_val,
            } => {
                if !big_val.is_finite() || big_val < 0.0 {
                    return Err(AdapterError::InvalidProfile {
                        name: "big_val",
                        value: big_val,
                    });
                }
                if !small_val.is_finite() || small_val < 0.0 {
                    return Err(AdapterError::InvalidProfile {
                        name: "small_val",
                        value: small_val,
                    });
                }
                if big_count > n_layers {
                    return Err(AdapterError::BigCountTooLarge {
                        big_count,
                        n_layers,
                    });
                }
                Ok(())
            }
        }
    }

    /// Planted singular values for layer `layer_pos` (0-based position in
    /// generation order), sorted descending.
    fn spectrum(&self, layer_pos: usize, rank: usize) -> Vec<f64> {
        match *self {
            SpectrumProfile::Flat => (0..rank).map(|_| 1.0).collect(),
            SpectrumProfile::PowerLaw { decay } => {
                let mut values = Vec::with_capacity(rank);
                let mut v = 1.0;
                for _ in 0..rank {
                    values.push(v);
                    v *= decay;
                }
                values.sort_by(|a, b| b.partial_cmp(a).unwrap());
                values
            }
            SpectrumProfile::Bimodal {
                big_count,
                big_val,
                small_val,
            } => {
                let v = if layer_pos < big_count {
                    big_val
                } else {
                    small_val
                };
                (0..rank).map(|_| v).collect()
            }
        }
    }
}

/// Module path template used for generated layers; mirrors common
/// transformer checkpoint naming so the parser round-trips it.
fn module_suffix(layer_type: LayerType) -> &'static str {
    match layer_type {
        LayerType::Q => "self_attn.q_proj",
        LayerType::K => "self_attn.k_proj",
        LayerType::V => "self_attn.v_proj",
        LayerType::O => "self_attn.o_proj",
        LayerType::M1 => "mlp.up_proj",
        LayerType::M2 => "mlp.down_proj",
    }
}

fn random_orthonormal(rows: usize, cols: usize, rng: &mut SplitMix64) -> Matrix {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.next_gaussian()).collect();
    let gaussian = Matrix::new(rows, cols, data).expect("gaussian draws are finite");
    householder_qr(&gaussian)
        .expect("rows >= cols by construction")
        .q
}

/// Generate a deterministic synthetic adapter set with planted spectra.
///
/// Layers cycle through the six layer types; six consecutive layers form one
/// transformer block. Every layer stores unscaled factors with scale 1, so
/// the planted values are also the effective singular values.
pub fn generate_synthetic(
    n_layers: usize,
    dims: (usize, usize),
    rank: usize,
    profile: &SpectrumProfile,
    seed: u64,
) -> Result<AdapterSet, AdapterError> {
    let (d1, d2) = dims;
    if n_layers == 0 {
        return Err(AdapterError::NoLayers);
    }
    let min_dim = d1.min(d2);
    if rank == 0 || rank > min_dim {
        return Err(AdapterError::InvalidRank { min_dim });
    }
    profile.validate(n_layers)?;

    let mut rng = SplitMix64::new(seed);
    let mut layers = Vec::with_capacity(n_layers);
    for pos in 0..n_layers {
        let layer_type = LayerType::ALL[pos % LayerType::ALL.len()];
        let block = pos / LayerType::ALL.len();
        let key = LayerKey {
            layer_index: block + 1,
            layer_type,
            module_path: module_path(block, layer_type),
        };

        let planted = profile.spectrum(pos, rank);
        let u = random_orthonormal(d1, rank, &mut rng);
        let v = random_orthonormal(d2, rank, &mut rng);

        // b = u * sqrt(diag), a = sqrt(diag) * v^T
        let mut b = Matrix::zeros(d1, rank);
        for j in 0..rank {
            let root = sqrt(planted[j]);
            for i in 0..d1 {
                b.set(i, j, u.get(i, j) * root);
            }
        }
        let mut a = Matrix::zeros(rank, d2);
        for j in 0..rank {
            let root = sqrt(planted[j]);
            for i in 0..d2 {
                a.set(j, i, root * v.get(i, j));
            }
        }

        layers.push(AdapterLayer::new(key, b, a, 1.0, StorageDtype::F32)?);
    }

    AdapterSet::new(layers, rank, rank as f64)
}

fn module_path(block: usize, layer_type: LayerType) -> String {
    format!(
        "base_model.model.layers.{}.{}",
        block,
        module_suffix(layer_type)
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn is_deterministic_per_seed() {
        let profile = SpectrumProfile::PowerLaw { decay: 0.5 };
        let a = generate_synthetic(7, (24, 18), 4, &profile, 99).unwrap();
        let b = generate_synthetic(7, (24, 18), 4, &profile, 99).unwrap();
        for (la, lb) in a.layers().iter().zip(b.layers()) {
            assert_eq!(la.key(), lb.key());
            assert_eq!(la.b().data(), lb.b().data());
            assert_eq!(la.a().data(), lb.a().data());
        }
        let c = generate_synthetic(7, (24, 18), 4, &profile, 100).unwrap();
        assert_ne!(a.layers()[0].b().data(), c.layers()[0].b().data());
    }

    #[test]
    fn rank_above_dims_is_rejected() {
        let err = generate_synthetic(2, (4, 8), 5, &SpectrumProfile::Flat, 1).unwrap_err();
        assert!(matches!(err, AdapterError::InvalidRank { min_dim: 4 }));
    }

    #[test]
    fn bimodal_splits_layers_not_positions() {
        let profile = SpectrumProfile::Bimodal {
            big_count: 2,
            big_val: 10.0,
            small_val: 0.01,
        };
        let set = generate_synthetic(4, (16, 16), 3, &profile, 7).unwrap();
        // Generation order is layer order here (single block, Y ordering).
        let norms: Vec<f64> = set
            .layers()
            .iter()
            .map(|l| l.b().frobenius_norm())
            .collect();
        assert!(norms[0] > 1.0 && norms[1] > 1.0);
        assert!(norms[2] < 1.0 && norms[3] < 1.0);
    }

    #[test]
    fn keys_follow_block_and_type_cycle() {
        let set = generate_synthetic(8, (8, 8), 2, &SpectrumProfile::Flat, 3).unwrap();
        let keys: Vec<_> = set
            .layers()
            .iter()
            .map(|l| (l.key().layer_index, l.key().layer_type))
            .collect();
        assert!(keys.contains(&(1, LayerType::Q)));
        assert!(keys.contains(&(1, LayerType::M2)));
        assert!(keys.contains(&(2, LayerType::Q)));
        assert!(keys.contains(&(2, LayerType::K)));
        assert_eq!(set.initial_budget(), 16);
    }
}
