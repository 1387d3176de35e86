//! Brute-force reference decomposition.
//!
//! Everything here works on the *materialized* d1 x d2 update, which the
//! fast path never forms. The reduction is a rank-revealing column-pivoted
//! QR of the ambient matrix followed by a small dense SVD, so the only code
//! shared with the fast path is primitive matrix arithmetic and the square
//! SVD kernel. Intended for tests and the `verify` command; it is expected
//! to be orders of magnitude slower.

// Permutation and pivot bookkeeping reads clearer with explicit indices.
#![allow(clippy::needless_range_loop)]

use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

use crate::adapter::AdapterLayer;
use crate::math::sqrt;
use crate::matrix::{LinalgError, Matrix};
use crate::svd::svd_square;

/// Largest materialized update accepted, in entries. Big enough for every
/// desk-scale dimension used in tests (up to 4096 x 4096), small enough to
/// stop an accidental multi-gigabyte allocation.
pub const MATERIALIZE_LIMIT: usize = 16_777_216;

/// Relative column-norm cutoff for rank detection in the pivoted QR.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("materialized update would hold {elements} entries, above the {limit} limit")]
    SizeGuard { elements: u128, limit: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Materialize the effective update `scale * b * a` of one layer.
pub fn materialize_update(layer: &AdapterLayer) -> Result<Matrix, OracleError> {
    let (d1, d2) = layer.dims();
    let elements = d1 as u128 * d2 as u128;
    if elements > MATERIALIZE_LIMIT as u128 {
        return Err(OracleError::SizeGuard {
            elements,
            limit: MATERIALIZE_LIMIT,
        });
    }
    Ok(layer.b().matmul(layer.a())?.scaled(layer.scale()))
}

/// Reference SVD of a materialized update.
#[derive(Debug, Clone)]
pub struct OracleDecomposition {
    d1: usize,
    d2: usize,
    /// Descending, length min(d1, d2); exact zeros past the detected rank.
    sigma: Vec<f64>,
    /// Left/right singular vectors for the detected rank; None when the
    /// update is exactly zero.
    u: Option<Matrix>,
    v: Option<Matrix>,
}

impl OracleDecomposition {
    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    /// Numerical rank detected by the pivoted QR.
    pub fn rank(&self) -> usize {
        self.u.as_ref().map_or(0, |u| u.cols())
    }

    /// Best rank-k approximation: the sum of the k leading singular
    /// triplets.
    pub fn truncate(&self, k: usize) -> Matrix {
        let mut out = Matrix::zeros(self.d1, self.d2);
        let (Some(u), Some(v)) = (&self.u, &self.v) else {
            return out;
        };
        let take = k.min(u.cols());
        for t in 0..take {
            let s = self.sigma[t];
            for i in 0..self.d1 {
                let c = s * u.get(i, t);
                if c == 0.0 {
                    continue;
                }
                for j in 0..self.d2 {
                    let cur = out.get(i, j);
                    out.set(i, j, cur + c * v.get(j, t));
                }
            }
        }
        out
    }
}

/// Full-precision SVD of the materialized effective update.
pub fn oracle_svd(layer: &AdapterLayer) -> Result<OracleDecomposition, OracleError> {
    let phi = materialize_update(layer)?;
    svd_of_materialized(&phi)
}

/// SVD of an explicit dense matrix via pivoted QR reduction. The detected
/// numerical rank must stay within the square-SVD side limit.
pub fn svd_of_materialized(phi: &Matrix) -> Result<OracleDecomposition, OracleError> {
    let d1 = phi.rows();
    let d2 = phi.cols();
    let max_rank = d1.min(d2);

    let (q1, r_pivoted, perm, detected) = pivoted_qr(phi, max_rank);
    let mut sigma = vec![0.0; max_rank];
    if detected == 0 {
        return Ok(OracleDecomposition {
            d1,
            d2,
            sigma,
            u: None,
            v: None,
        });
    }

    // Undo the column permutation: w = R * P^T, s x d2.
    let mut w = Matrix::zeros(detected, d2);
    for j in 0..d2 {
        for i in 0..detected {
            w.set(i, perm[j], r_pivoted.get(i, j));
        }
    }

    // Second reduction: thin QR of w^T, then a small square SVD.
    let (q2, r2) = plain_qr(&w.transpose());
    let small = svd_square(&r2.transpose())?;

    let u = q1.matmul(&small.u)?;
    let v = q2.matmul(&small.v)?;
    sigma[..detected].copy_from_slice(&small.sigma);

    Ok(OracleDecomposition {
        d1,
        d2,
        sigma,
        u: Some(u),
        v: Some(v),
    })
}

/// Column-pivoted Householder QR with early exit once the remaining columns
/// are negligible. Returns the thin Q (d1 x s), the leading s rows of R in
/// pivoted column order (s x d2), the column permutation, and s.
fn pivoted_qr(m: &Matrix, max_steps: usize) -> (Matrix, Matrix, Vec<usize>, usize) {
    let rows = m.rows();
    let cols = m.cols();
    let mut work = m.clone();
    let mut perm: Vec<usize> = (0..cols).collect();
    let mut reflectors: Vec<(Vec<f64>, f64)> = Vec::new();

    // Column norms are recomputed from scratch every step; at the ranks this
    // runs at, robustness is worth more than the flops saved by downdating.
    let mut initial_max = 0.0f64;
    for j in 0..cols {
        let mut acc = 0.0;
        for i in 0..rows {
            let x = work.get(i, j);
            acc += x * x;
        }
        initial_max = initial_max.max(acc);
    }
    let cutoff = initial_max * RANK_TOL * RANK_TOL;

    let mut detected = 0;
    for k in 0..max_steps {
        let mut best_j = k;
        let mut best_norm = -1.0f64;
        for j in k..cols {
            let mut acc = 0.0;
            for i in k..rows {
                let x = work.get(i, j);
                acc += x * x;
            }
            if acc > best_norm {
                best_norm = acc;
                best_j = j;
            }
        }
        if best_norm <= cutoff || initial_max == 0.0 {
            break;
        }
        if best_j != k {
            for i in 0..rows {
                let tmp = work.get(i, k);
                work.set(i, k, work.get(i, best_j));
                work.set(i, best_j, tmp);
            }
            perm.swap(k, best_j);
        }

        if let Some(reflector) = reduce_column(&mut work, k, rows, cols) {
            reflectors.push(reflector);
        } else {
            reflectors.push((Vec::new(), 0.0));
        }
        detected = k + 1;
    }

    if detected == 0 {
        return (Matrix::zeros(rows, 1), Matrix::zeros(1, cols), perm, 0);
    }

    let mut q = Matrix::zeros(rows, detected);
    for d in 0..detected {
        q.set(d, d, 1.0);
    }
    for k in (0..detected).rev() {
        let (v, beta) = &reflectors[k];
        if v.is_empty() {
            continue;
        }
        for j in 0..detected {
            let mut dot = 0.0;
            for (t, vi) in v.iter().enumerate() {
                dot += vi * q.get(k + t, j);
            }
            let s = *beta * dot;
            for (t, vi) in v.iter().enumerate() {
                let cur = q.get(k + t, j);
                q.set(k + t, j, cur - s * vi);
            }
        }
    }

    let mut r = Matrix::zeros(detected, cols);
    for i in 0..detected {
        for j in i..cols {
            r.set(i, j, work.get(i, j));
        }
    }

    (q, r, perm, detected)
}

/// One Householder step on column k of `work`, scaled by the column's
/// max-abs entry so beta stays bounded. Returns None when the column needs
/// no reduction.
fn reduce_column(work: &mut Matrix, k: usize, rows: usize, cols: usize) -> Option<(Vec<f64>, f64)> {
    let alpha = work.get(k, k);
    let mut col_max = alpha.abs();
    for i in (k + 1)..rows {
        col_max = col_max.max(work.get(i, k).abs());
    }
    if col_max == 0.0 {
        return None;
    }
    let inv = 1.0 / col_max;
    let mut tail_sq = 0.0;
    for i in (k + 1)..rows {
        let x = work.get(i, k) * inv;
        tail_sq += x * x;
    }
    if tail_sq == 0.0 && alpha >= 0.0 {
        return None;
    }

    let a_scaled = alpha * inv;
    let norm = sqrt(a_scaled * a_scaled + tail_sq);
    let v0 = a_scaled + norm.copysign(a_scaled);
    let mut v = Vec::with_capacity(rows - k);
    v.push(v0);
    for i in (k + 1)..rows {
        v.push(work.get(i, k) * inv);
    }
    let beta = 2.0 / (v0 * v0 + tail_sq);
    for j in (k + 1)..cols {
        let mut dot = 0.0;
        for (t, vi) in v.iter().enumerate() {
            dot += vi * work.get(k + t, j);
        }
        let s = beta * dot;
        for (t, vi) in v.iter().enumerate() {
            let cur = work.get(k + t, j);
            work.set(k + t, j, cur - s * vi);
        }
    }
    work.set(k, k, -(norm * col_max).copysign(alpha));
    for i in (k + 1)..rows {
        work.set(i, k, 0.0);
    }
    Some((v, beta))
}

/// Unpivoted thin Householder QR; local to the oracle so the reference path
/// stays independent of the fast kernels.
fn plain_qr(m: &Matrix) -> (Matrix, Matrix) {
    let rows = m.rows();
    let cols = m.cols();
    debug_assert!(rows >= cols);
    let mut work = m.clone();
    let mut reflectors: Vec<(Vec<f64>, f64)> = Vec::with_capacity(cols);

    for k in 0..cols {
        if let Some(reflector) = reduce_column(&mut work, k, rows, cols) {
            reflectors.push(reflector);
        } else {
            reflectors.push((Vec::new(), 0.0));
        }
    }

    let mut q = Matrix::zeros(rows, cols);
    for d in 0..cols {
        q.set(d, d, 1.0);
    }
    for k in (0..cols).rev() {
        let (v, beta) = &reflectors[k];
        if v.is_empty() {
            continue;
        }
        for j in 0..cols {
            let mut dot = 0.0;
            for (t, vi) in v.iter().enumerate() {
                dot += vi * q.get(k + t, j);
            }
            let s = *beta * dot;
            for (t, vi) in v.iter().enumerate() {
                let cur = q.get(k + t, j);
                q.set(k + t, j, cur - s * vi);
            }
        }
    }

    let mut r = Matrix::zeros(cols, cols);
    for i in 0..cols {
        for j in i..cols {
            r.set(i, j, work.get(i, j));
        }
    }
    (q, r)
}

/// Frobenius distance between same-shaped matrices.
pub fn frobenius_distance(x: &Matrix, y: &Matrix) -> Result<f64, LinalgError> {
    if x.rows() != y.rows() || x.cols() != y.cols() {
        return Err(LinalgError::ShapeMismatch {
            a_rows: x.rows(),
            a_cols: x.cols(),
            b_rows: y.rows(),
            b_cols: y.cols(),
        });
    }
    let mut acc = 0.0;
    for (a, b) in x.data().iter().zip(y.data()) {
        let d = a - b;
        acc += d * d;
    }
    Ok(sqrt(acc))
}
