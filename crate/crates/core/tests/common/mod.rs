//! Independent oracles for cross-checking library results.
//!
//! Everything here recomputes a quantity the library also computes, but by a
//! different route: eigendecomposition instead of singular-value iteration,
//! brute-force threshold recounting instead of a single sorted sweep, finite
//! differences instead of backpropagation. Tests compare the two routes.

#![allow(dead_code)]

use auditfl::autoencoder::{loss_and_gradients, AeModel};
use auditfl::numerics::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// matrix columns. Converges quadratically; the sweep loop stops once every
/// off-diagonal entry is below `1e-12` times the largest diagonal magnitude.
pub fn jacobi_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    let n = a.rows();
    assert_eq!(n, a.cols(), "jacobi_eigen needs a square matrix");
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }

    let scale = (0..n).map(|i| m[i][i].abs()).fold(1e-300, f64::max);
    for _sweep in 0..200 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                off = off.max(m[p][q].abs());
            }
        }
        if off <= 1e-12 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() <= 1e-300 {
                    continue;
                }
                // Rotation angle zeroing m[p][q], the textbook way.
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j][j].partial_cmp(&m[i][i]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| m[i][i]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v[r][order[c]]);
    (values, vectors)
}

/// Average precision by brute-force threshold enumeration.
///
/// For every distinct score, taken highest first, everything at or above it
/// is predicted positive and precision/recall are recounted from scratch over
/// the whole set; the area accumulates as `(recall - prev_recall) *
/// precision`. Quadratic on purpose — no sorting-sweep shortcuts shared with
/// the implementation under test.
pub fn ap_threshold_enumeration(scores: &[f64], positive: &[bool]) -> f64 {
    assert_eq!(scores.len(), positive.len());
    let total_pos = positive.iter().filter(|&&p| p).count();
    assert!(total_pos > 0, "oracle needs at least one positive");

    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();

    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for &t in &thresholds {
        let mut tp = 0usize;
        let mut predicted = 0usize;
        for (&s, &p) in scores.iter().zip(positive) {
            if s >= t {
                predicted += 1;
                if p {
                    tp += 1;
                }
            }
        }
        let recall = tp as f64 / total_pos as f64;
        let precision = tp as f64 / predicted as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    ap
}

/// Central finite-difference gradients of the batch loss with respect to
/// every weight and bias, using step `h` per parameter.
pub fn fd_gradients(model: &AeModel, batch: &Matrix, h: f64) -> (Vec<Matrix>, Vec<Vec<f64>>) {
    let loss_at = |m: &AeModel| loss_and_gradients(m, batch).unwrap().0;
    let mut grad_w = Vec::new();
    let mut grad_b = Vec::new();
    for l in 0..model.weights.len() {
        let (rows, cols) = (model.weights[l].rows(), model.weights[l].cols());
        let mut gw = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                let orig = model.weights[l].get(i, j);
                let mut probe = model.clone();
                probe.weights[l].set(i, j, orig + h);
                let up = loss_at(&probe);
                probe.weights[l].set(i, j, orig - h);
                let down = loss_at(&probe);
                gw.set(i, j, (up - down) / (2.0 * h));
            }
        }
        grad_w.push(gw);

        let mut gb = vec![0.0; model.biases[l].len()];
        for (k, g) in gb.iter_mut().enumerate() {
            let orig = model.biases[l][k];
            let mut probe = model.clone();
            probe.biases[l][k] = orig + h;
            let up = loss_at(&probe);
            probe.biases[l][k] = orig - h;
            let down = loss_at(&probe);
            *g = (up - down) / (2.0 * h);
        }
        grad_b.push(gb);
    }
    (grad_w, grad_b)
}

/// Smallest |pre-activation| across all hidden layers and samples.
///
/// Finite differences are only meaningful away from the ReLU kink: a unit
/// whose pre-activation sits within the step size of zero flips state under
/// perturbation and the two-sided difference stops matching any subgradient.
/// Tests assert this margin is comfortably larger than the step.
pub fn min_hidden_preactivation_margin(model: &AeModel, batch: &Matrix) -> f64 {
    let last = model.weights.len() - 1;
    let mut a = batch.clone();
    let mut margin = f64::INFINITY;
    for l in 0..last {
        let mut z = a.matmul(&model.weights[l]).unwrap();
        for i in 0..z.rows() {
            for (v, b) in z.row_mut(i).iter_mut().zip(&model.biases[l]) {
                *v += b;
                margin = margin.min(v.abs());
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        a = z;
    }
    margin
}

/// Two-pass mean and sample (n-1) standard deviation.
pub fn mean_std_two_pass(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// Uniform random matrix in `[-1, 1)` from a fixed seed.
pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    Matrix::from_fn(rows, cols, |_, _| rng.gen::<f64>() * 2.0 - 1.0)
}

/// Uniform random matrix whose rows lie in a `rank`-dimensional subspace.
pub fn random_low_rank(rows: usize, cols: usize, rank: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let left = Matrix::from_fn(rows, rank, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
    let right = Matrix::from_fn(rank, cols, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
    left.matmul(&right).unwrap()
}

/// Relative Frobenius distance `|a - b| / max(|b|, floor)`.
pub fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
    let denom = b.frob_norm().max(1e-12);
    a.sub(b).unwrap().frob_norm() / denom
}
