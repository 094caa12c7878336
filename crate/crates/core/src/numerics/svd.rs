//! Singular value decomposition via one-sided Jacobi rotations.
//!
//! One-sided Jacobi is slower than bidiagonalization-based methods but is
//! simple, deterministic (fixed cyclic pivot order, no randomness, no
//! platform-dependent branching), and delivers high relative accuracy even
//! for small singular values. Decompositions here are at most a few thousand
//! by a few hundred, where this is entirely adequate.

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Thin SVD `a = u * diag(s) * v^T` with `u: n x k`, `v: m x k`,
/// `k = min(n, m)`, singular values sorted in descending order, and the
/// columns of `u` and `v` orthonormal.
#[derive(Clone, Debug)]
pub struct SvdResult {
    pub u: Matrix,
    pub singular_values: Vec<f64>,
    pub v: Matrix,
}

impl SvdResult {
    /// Relative cutoff under which a singular value is treated as zero:
    /// `max(n, m) * s_max * 1e-12`.
    pub fn cutoff(&self, rows: usize, cols: usize) -> f64 {
        let s_max = self.singular_values.first().copied().unwrap_or(0.0);
        rows.max(cols) as f64 * s_max * 1e-12
    }

    /// Number of singular values above the cutoff.
    pub fn rank(&self, rows: usize, cols: usize) -> usize {
        let cut = self.cutoff(rows, cols);
        self.singular_values.iter().filter(|&&s| s > cut).count()
    }
}

/// Applies the plane rotation with cosine `c` and sine `s` to rows `p` and
/// `q` (`p < q`) of `m`.
fn rotate_rows(m: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let cols = m.cols();
    let data = m.data_mut();
    let (left, right) = data.split_at_mut(q * cols);
    let rp = &mut left[p * cols..(p + 1) * cols];
    let rq = &mut right[..cols];
    for (a, b) in rp.iter_mut().zip(rq.iter_mut()) {
        let x = *a;
        let y = *b;
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

const MAX_SWEEPS: usize = 64;
const ORTHO_TOL: f64 = 1.0e-15;

/// Full thin SVD of `a`.
pub fn svd(a: &Matrix) -> SvdResult {
    if a.rows() < a.cols() {
        // Work on the transpose so the rotated side is the short one, then
        // swap the roles of u and v.
        let t = svd(&a.transpose());
        return SvdResult { u: t.v, singular_values: t.singular_values, v: t.u };
    }
    let n = a.rows();
    let m = a.cols();

    // Store the working matrix transposed: row j of `wt` is column j of the
    // matrix being diagonalized, so every rotation touches two contiguous
    // slices. `vt` accumulates the same rotations starting from the identity.
    let mut wt = a.transpose();
    let mut vt = Matrix::identity(m);

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..m.saturating_sub(1) {
            for q in p + 1..m {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for (x, y) in wt.row(p).iter().zip(wt.row(q)) {
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma.abs() <= ORTHO_TOL * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_rows(&mut wt, p, q, c, s);
                rotate_rows(&mut vt, p, q, c, s);
                rotated = true;
            }
        }
        if !rotated {
            break;
        }
    }

    // Column norms are the singular values; sort them descending, breaking
    // ties by original position so the result is reproducible.
    let norms: Vec<f64> = (0..m)
        .map(|j| wt.row(j).iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap().then(i.cmp(&j)));

    let singular_values: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let mut u = Matrix::zeros(n, m);
    let mut v = Matrix::zeros(m, m);
    for (dst, &src) in order.iter().enumerate() {
        if norms[src] > 0.0 {
            for (i, &w) in wt.row(src).iter().enumerate() {
                u.set(i, dst, w / norms[src]);
            }
        }
        for i in 0..m {
            v.set(i, dst, vt.get(src, i));
        }
    }

    // Columns with zero norm leave u undefined there; fill them with an
    // orthonormal completion so u always has orthonormal columns.
    for j in 0..m {
        if singular_values[j] > 0.0 {
            continue;
        }
        'candidates: for t in 0..n {
            let mut r = vec![0.0; n];
            r[t] = 1.0;
            // Unfilled columns (including j itself) are still all-zero, so
            // projecting against every column is safe.
            for c in 0..m {
                let dot: f64 = (0..n).map(|i| u.get(i, c) * r[i]).sum();
                for (i, ri) in r.iter_mut().enumerate() {
                    *ri -= dot * u.get(i, c);
                }
            }
            let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.5 {
                for (i, ri) in r.iter().enumerate() {
                    u.set(i, j, ri / norm);
                }
                break 'candidates;
            }
        }
    }

    SvdResult { u, singular_values, v }
}

/// Rank-truncated SVD: keeps the leading `rank` singular triplets.
pub fn svd_lowrank(a: &Matrix, rank: usize) -> Result<SvdResult> {
    let k = a.rows().min(a.cols());
    if rank == 0 {
        return Err(Error::Dimension("rank must be at least 1".into()));
    }
    if rank > k {
        return Err(Error::Dimension(format!(
            "rank {} exceeds min(rows, cols) = {} for a {}x{} matrix",
            rank,
            k,
            a.rows(),
            a.cols()
        )));
    }
    let full = svd(a);
    Ok(SvdResult {
        u: full.u.truncate_cols(rank),
        singular_values: full.singular_values[..rank].to_vec(),
        v: full.v.truncate_cols(rank),
    })
}

/// Moore-Penrose pseudoinverse via SVD, with singular values at or below
/// `max(rows, cols) * s_max * 1e-12` treated as zero.
pub fn pinv(a: &Matrix) -> Matrix {
    let dec = svd(a);
    let cut = dec.cutoff(a.rows(), a.cols());
    let k = dec.singular_values.len();
    // a^+ = v * diag(1/s) * u^T, built as (v scaled by 1/s) * u^T.
    let mut v_scaled = dec.v.clone();
    for j in 0..k {
        let s = dec.singular_values[j];
        let f = if s > cut { 1.0 / s } else { 0.0 };
        for i in 0..a.cols() {
            v_scaled.set(i, j, v_scaled.get(i, j) * f);
        }
    }
    v_scaled.matmul(&dec.u.transpose()).expect("shapes agree by construction")
}
