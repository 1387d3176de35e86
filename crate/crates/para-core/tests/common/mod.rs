//! Helpers shared by the integration suites.
#![allow(dead_code)]

use para_core::{AdapterLayer, LayerKey, LayerType, Matrix, StorageDtype};

/// Local SplitMix64 so fixtures are reproducible without depending on the
/// crate's internals.
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn gaussian(&mut self) -> f64 {
        loop {
            let u = 2.0 * self.next_f64() - 1.0;
            let v = 2.0 * self.next_f64() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                return u * (-2.0 * s.ln() / s).sqrt();
            }
        }
    }

    pub fn usize_in(&mut self, lo: usize, hi: usize) -> usize {
        lo + (self.next_u64() as usize) % (hi - lo + 1)
    }
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut TestRng) -> Matrix {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.gaussian()).collect();
    Matrix::new(rows, cols, data).unwrap()
}

/// A random trained-looking layer with Gaussian factors (spectrum unknown
/// but generic) and the given scale.
pub fn random_layer(
    index: usize,
    layer_type: LayerType,
    d1: usize,
    d2: usize,
    rank: usize,
    scale: f64,
    rng: &mut TestRng,
) -> AdapterLayer {
    let key = LayerKey {
        layer_index: index,
        layer_type,
        module_path: format!("model.layers.{}.{}", index - 1, layer_type),
    };
    AdapterLayer::new(
        key,
        random_matrix(d1, rank, rng),
        random_matrix(rank, d2, rng),
        scale,
        StorageDtype::F32,
    )
    .unwrap()
}

pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    assert_eq!(a.rows(), b.rows());
    assert_eq!(a.cols(), b.cols());
    let mut worst = 0.0f64;
    for (x, y) in a.data().iter().zip(b.data()) {
        worst = worst.max((x - y).abs());
    }
    worst
}

/// Effective update of a layer, materialized directly (small dims only).
pub fn effective_update(layer: &AdapterLayer) -> Matrix {
    layer.b().matmul(layer.a()).unwrap().scaled(layer.scale())
}
