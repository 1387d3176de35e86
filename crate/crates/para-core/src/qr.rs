//! Thin Householder QR for tall matrices.

use alloc::vec::Vec;

use crate::math::sqrt;
use crate::matrix::{LinalgError, Matrix};

/// Thin QR factorization `m = q * r_upper`.
///
/// `q` is `m x n` with orthonormal columns, `r_upper` is `n x n` with a
/// non-negative diagonal and exact zeros below it, which makes the
/// factorization unique for full-column-rank input.
#[derive(Debug, Clone)]
pub struct QrFactors {
    pub q: Matrix,
    pub r_upper: Matrix,
}

struct Reflector {
    /// Householder vector for rows `k..m`; empty when the column needed no work.
    v: Vec<f64>,
    beta: f64,
}

/// Householder QR of a tall matrix (`rows >= cols`).
///
/// Rank-deficient input is fine: exhausted columns produce zeros on the
/// diagonal of `r_upper` and the corresponding `q` columns are still
/// orthonormal.
pub fn householder_qr(m: &Matrix) -> Result<QrFactors, LinalgError> {
    let rows = m.rows();
    let cols = m.cols();
    if rows < cols {
        return Err(LinalgError::NotTall {
            op: "householder_qr",
            rows,
            cols,
        });
    }

    let mut work = m.clone();
    let mut reflectors: Vec<Reflector> = Vec::with_capacity(cols);

    for k in 0..cols {
        let alpha = work.get(k, k);
        let mut col_max = alpha.abs();
        for i in (k + 1)..rows {
            col_max = col_max.max(work.get(i, k).abs());
        }
        if col_max == 0.0 {
            reflectors.push(Reflector {
                v: Vec::new(),
                beta: 0.0,
            });
            continue;
        }

        // Work on the column scaled by its max-abs entry; the reflector is
        // scale-invariant and this keeps beta bounded for extreme inputs.
        let inv = 1.0 / col_max;
        let mut tail_sq = 0.0;
        for i in (k + 1)..rows {
            let x = work.get(i, k) * inv;
            tail_sq += x * x;
        }
        if tail_sq == 0.0 && alpha >= 0.0 {
            // Column is already reduced; skipping keeps e.g. QR(I) = (I, I)
            // bit-exact.
            reflectors.push(Reflector {
                v: Vec::new(),
                beta: 0.0,
            });
            continue;
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

        // The reflector maps column k onto -sign(alpha) * norm * e1 exactly;
        // write that instead of the rounded result of applying it.
        work.set(k, k, -(norm * col_max).copysign(alpha));
        for i in (k + 1)..rows {
            work.set(i, k, 0.0);
        }
        reflectors.push(Reflector { v, beta });
    }

    // Accumulate the thin q by applying the reflectors in reverse to the
    // first `cols` columns of the identity.
    let mut q = Matrix::zeros(rows, cols);
    for d in 0..cols {
        q.set(d, d, 1.0);
    }
    for k in (0..cols).rev() {
        let Reflector { v, beta } = &reflectors[k];
        if v.is_empty() {
            continue;
        }
        for j in 0..cols {
            let mut dot = 0.0;
            for (t, vi) in v.iter().enumerate() {
                dot += vi * q.get(k + t, j);
            }
            let s = beta * dot;
            for (t, vi) in v.iter().enumerate() {
                let cur = q.get(k + t, j);
                q.set(k + t, j, cur - s * vi);
            }
        }
    }

    let mut r_upper = Matrix::zeros(cols, cols);
    for i in 0..cols {
        for j in i..cols {
            r_upper.set(i, j, work.get(i, j));
        }
    }
    // Flip signs so the diagonal of r is non-negative.
    for k in 0..cols {
        if r_upper.get(k, k) < 0.0 {
            for j in k..cols {
                r_upper.set(k, j, -r_upper.get(k, j));
            }
            for i in 0..rows {
                q.set(i, k, -q.get(i, k));
            }
        }
    }

    Ok(QrFactors { q, r_upper })
}
