//! Linear-algebra results cross-checked against an independent
//! eigendecomposition oracle and against their defining identities.

mod common;

use auditfl::numerics::{pca_fit, pinv, svd, svd_lowrank, Matrix};
use common::{jacobi_eigen, random_low_rank, random_matrix, rel_err};

/// Shape grid: tall, wide, square, thin; full-rank and rank-deficient.
fn case_matrices() -> Vec<Matrix> {
    let mut cases = Vec::new();
    let shapes = [(50, 20), (20, 50), (33, 33), (7, 3), (3, 7), (50, 1), (1, 20), (2, 2)];
    let mut seed = 0x0a11_ce00u64;
    while cases.len() < 100 {
        for &(r, c) in &shapes {
            seed += 1;
            if cases.len() % 3 == 2 {
                let rank = 1 + (seed as usize) % r.min(c);
                cases.push(random_low_rank(r, c, rank, seed));
            } else {
                cases.push(random_matrix(r, c, seed));
            }
            if cases.len() == 100 {
                break;
            }
        }
    }
    cases
}

#[test]
fn pseudoinverse_satisfies_the_four_penrose_conditions() {
    for (i, a) in case_matrices().iter().enumerate() {
        let x = pinv(a);
        assert_eq!((x.rows(), x.cols()), (a.cols(), a.rows()), "case {}", i);

        let ax = a.matmul(&x).unwrap();
        let xa = x.matmul(a).unwrap();
        let axa = ax.matmul(a).unwrap();
        let xax = xa.matmul(&x).unwrap();
        assert!(rel_err(&axa, a) < 1e-6, "case {}: AXA != A ({})", i, rel_err(&axa, a));
        assert!(rel_err(&xax, &x) < 1e-6, "case {}: XAX != X ({})", i, rel_err(&xax, &x));
        let ax_t = ax.transpose();
        let xa_t = xa.transpose();
        assert!(rel_err(&ax_t, &ax) < 1e-6, "case {}: AX not symmetric", i);
        assert!(rel_err(&xa_t, &xa) < 1e-6, "case {}: XA not symmetric", i);
    }
}

#[test]
fn svd_factors_are_orthonormal_and_reproduce_the_matrix() {
    for (i, a) in case_matrices().iter().enumerate() {
        let f = svd(a);
        let k = f.singular_values.len();
        assert_eq!(k, a.rows().min(a.cols()), "case {}", i);

        for w in f.singular_values.windows(2) {
            assert!(w[0] >= w[1] - 1e-12, "case {}: singular values not descending", i);
        }
        assert!(f.singular_values.iter().all(|&s| s >= 0.0), "case {}", i);

        let utu = f.u.transpose().matmul(&f.u).unwrap();
        let vtv = f.v.transpose().matmul(&f.v).unwrap();
        let eye = Matrix::identity(k);
        assert!(rel_err(&utu, &eye) < 1e-6, "case {}: U columns not orthonormal", i);
        assert!(rel_err(&vtv, &eye) < 1e-6, "case {}: V columns not orthonormal", i);

        let mut us = f.u.clone();
        for r in 0..us.rows() {
            for c in 0..k {
                us.set(r, c, us.get(r, c) * f.singular_values[c]);
            }
        }
        let back = us.matmul(&f.v.transpose()).unwrap();
        assert!(rel_err(&back, a) < 1e-6, "case {}: USV^T != A ({})", i, rel_err(&back, a));
    }
}

#[test]
fn squared_singular_values_match_jacobi_eigenvalues_of_the_gram_matrix() {
    for (i, a) in case_matrices().iter().enumerate() {
        let f = svd(a);
        let gram = a.transpose().matmul(a).unwrap();
        let (eigs, _) = jacobi_eigen(&gram);
        let scale = eigs.first().copied().unwrap_or(0.0).max(1e-12);
        for (j, &s) in f.singular_values.iter().enumerate() {
            let lam = if j < eigs.len() { eigs[j].max(0.0) } else { 0.0 };
            assert!(
                (s * s - lam).abs() / scale < 1e-6,
                "case {}: sigma_{}^2 = {} vs eigenvalue {}",
                i,
                j,
                s * s,
                lam
            );
        }
    }
}

/// The best rank-k approximation error in Frobenius norm is the root of the
/// discarded squared singular values, and the truncated factorization
/// achieves exactly that.
#[test]
fn truncated_svd_achieves_the_eckart_young_bound() {
    for (i, a) in case_matrices().iter().enumerate() {
        let full = svd(a);
        let max_k = full.singular_values.len();
        for k in [1, 2, max_k.saturating_sub(1).max(1), max_k] {
            if k > max_k {
                continue;
            }
            let t = svd_lowrank(a, k).unwrap();
            assert_eq!(t.singular_values.len(), k, "case {} k {}", i, k);

            let mut us = t.u.clone();
            for r in 0..us.rows() {
                for c in 0..k {
                    us.set(r, c, us.get(r, c) * t.singular_values[c]);
                }
            }
            let approx = us.matmul(&t.v.transpose()).unwrap();
            let err = a.sub(&approx).unwrap().frob_norm();
            let bound: f64 = full.singular_values[k..].iter().map(|s| s * s).sum::<f64>().sqrt();
            let scale = a.frob_norm().max(1e-12);
            assert!(
                (err - bound).abs() / scale < 1e-6,
                "case {} k {}: residual {} vs discarded-energy bound {}",
                i,
                k,
                err,
                bound
            );
        }
    }
}

/// Principal components fitted via singular values agree with an
/// eigendecomposition of the sample covariance matrix: same explained
/// variances, same projector onto the retained subspace.
#[test]
fn pca_agrees_with_covariance_eigendecomposition() {
    let mut checked = 0;
    for (i, a) in case_matrices().iter().enumerate() {
        if a.rows() < 3 {
            continue;
        }
        let n = a.rows();
        let m = a.cols();

        // Sample covariance about the column means, n-1 in the denominator.
        let mut means = vec![0.0; m];
        for r in 0..n {
            for (j, mu) in means.iter_mut().enumerate() {
                *mu += a.get(r, j);
            }
        }
        for mu in &mut means {
            *mu /= n as f64;
        }
        let centered = Matrix::from_fn(n, m, |r, j| a.get(r, j) - means[j]);
        let mut cov = centered.transpose().matmul(&centered).unwrap();
        for v in cov.data_mut() {
            *v /= (n - 1) as f64;
        }
        let (eigs, vecs) = jacobi_eigen(&cov);

        let k = m.min(n - 1).min(4);
        let model = match pca_fit(a, k) {
            Ok(model) => model,
            Err(_) => continue, // fewer nonzero directions than k
        };
        checked += 1;

        let scale = eigs[0].max(1e-12);
        for (j, &ev) in model.explained_variance.iter().enumerate() {
            assert!(
                (ev - eigs[j].max(0.0)).abs() / scale < 1e-6,
                "case {}: component {} variance {} vs eigenvalue {}",
                i,
                j,
                ev,
                eigs[j]
            );
        }

        // Compare subspaces through their projectors; individual vectors may
        // differ by sign or rotate within near-degenerate eigenvalue groups,
        // so require a visible spectral gap before comparing.
        if k < m && (eigs[k - 1] - eigs[k]) / scale > 1e-3 {
            let comp = &model.components; // m x k
            let proj_pca = comp.matmul(&comp.transpose()).unwrap();
            let top = Matrix::from_fn(m, k, |r, c| vecs.get(r, c));
            let proj_eig = top.matmul(&top.transpose()).unwrap();
            assert!(
                rel_err(&proj_pca, &proj_eig) < 1e-6,
                "case {}: retained subspace disagrees with eigenvectors ({})",
                i,
                rel_err(&proj_pca, &proj_eig)
            );
        }
    }
    assert!(checked >= 50, "only {} PCA cases exercised", checked);
}
