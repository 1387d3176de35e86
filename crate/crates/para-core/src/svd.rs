//! Full SVD of small square matrices via one-sided Jacobi rotations.

// Paired-column updates read clearer with explicit indices.
#![allow(clippy::needless_range_loop)]

use alloc::vec;
use alloc::vec::Vec;

use crate::math::sqrt;
use crate::matrix::{LinalgError, Matrix};

/// Largest side accepted by [`svd_square`]. Jacobi sweeps are cubic per
/// sweep, so anything bigger belongs to a different algorithm.
pub const SVD_SIDE_LIMIT: usize = 1024;

const JACOBI_TOL: f64 = 1e-15;
const MAX_SWEEPS: usize = 100;

/// Full SVD `m = u * diag(sigma) * v^T` of a square matrix.
///
/// `u` and `v` are square orthonormal even when `m` is singular; `sigma` is
/// non-negative and sorted in descending order.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

/// One-sided Jacobi SVD.
///
/// Rotations orthogonalize the columns of a working copy of `m`; the
/// accumulated rotations form `v`, the normalized columns form `u`, and the
/// column norms are the singular values. Columns that collapse to zero get
/// their `u` counterparts from a deterministic basis completion.
pub fn svd_square(m: &Matrix) -> Result<SvdFactors, LinalgError> {
    let n = m.rows();
    if m.cols() != n {
        return Err(LinalgError::NotSquare {
            op: "svd_square",
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    if n > SVD_SIDE_LIMIT {
        return Err(LinalgError::SideLimit {
            side: n,
            limit: SVD_SIDE_LIMIT,
        });
    }

    // Column-major working copies: w[j] is column j of m, v[j] of identity.
    let mut w: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| m.get(i, j)).collect())
        .collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut col = vec![0.0; n];
            col[j] = 1.0;
            col
        })
        .collect();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for i in 0..n {
                    let wp = w[p][i];
                    let wq = w[q][i];
                    app += wp * wp;
                    aqq += wq * wq;
                    apq += wp * wq;
                }
                if apq == 0.0 || apq.abs() <= JACOBI_TOL * sqrt(app * aqq) {
                    continue;
                }
                rotated = true;

                let zeta = (aqq - app) / (2.0 * apq);
                // For huge |zeta| the exact tangent is 1/(2*zeta) to double
                // precision; computing zeta^2 there would overflow.
                let t = if zeta.abs() >= 1e150 {
                    0.5 / zeta
                } else if zeta >= 0.0 {
                    1.0 / (zeta + sqrt(1.0 + zeta * zeta))
                } else {
                    -1.0 / (-zeta + sqrt(1.0 + zeta * zeta))
                };
                let c = 1.0 / sqrt(1.0 + t * t);
                let s = c * t;

                for i in 0..n {
                    let wp = w[p][i];
                    let wq = w[q][i];
                    w[p][i] = c * wp - s * wq;
                    w[q][i] = s * wp + c * wq;
                }
                for i in 0..n {
                    let vp = v[p][i];
                    let vq = v[q][i];
                    v[p][i] = c * vp - s * vq;
                    v[q][i] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = w
        .iter()
        .map(|col| sqrt(col.iter().map(|x| x * x).sum()))
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap().then(a.cmp(&b)));

    let mut sigma = Vec::with_capacity(n);
    let mut u = Matrix::zeros(n, n);
    let mut v_out = Matrix::zeros(n, n);
    let mut pending: Vec<usize> = Vec::new();

    for (slot, &src) in order.iter().enumerate() {
        sigma.push(norms[src]);
        for i in 0..n {
            v_out.set(i, slot, v[src][i]);
        }
        if norms[src] > 0.0 {
            let inv = 1.0 / norms[src];
            for i in 0..n {
                u.set(i, slot, w[src][i] * inv);
            }
        } else {
            pending.push(slot);
        }
    }

    // Zero singular values leave holes in u; fill them with unit vectors
    // orthogonalized against everything already placed.
    for &slot in &pending {
        complete_column(&mut u, slot, n);
    }

    Ok(SvdFactors { u, sigma, v: v_out })
}

/// Pick the basis vector with the largest residual after projecting out the
/// columns already present, re-orthogonalize it once more, and normalize.
fn complete_column(u: &mut Matrix, slot: usize, n: usize) {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for b in 0..n {
        let mut cand = vec![0.0; n];
        cand[b] = 1.0;
        project_out(u, slot, &mut cand, n);
        let norm_sq: f64 = cand.iter().map(|x| x * x).sum();
        if best.as_ref().is_none_or(|(bn, _)| norm_sq > *bn) {
            best = Some((norm_sq, cand));
        }
        if norm_sq > 0.5 {
            break;
        }
    }
    let (_, mut col) = best.expect("n > 0");
    // Second pass tightens orthogonality before normalizing.
    project_out(u, slot, &mut col, n);
    let norm = sqrt(col.iter().map(|x| x * x).sum());
    for i in 0..n {
        u.set(i, slot, col[i] / norm);
    }
}

fn project_out(u: &Matrix, slot: usize, cand: &mut [f64], n: usize) {
    for j in 0..n {
        if j == slot {
            continue;
        }
        // Unfilled slots hold zero columns and project to nothing.
        let mut dot = 0.0;
        for i in 0..n {
            dot += u.get(i, j) * cand[i];
        }
        if dot != 0.0 {
            for i in 0..n {
                cand[i] -= dot * u.get(i, j);
            }
        }
    }
}
