//! Principal component analysis on row-sample matrices.

use crate::error::{Error, Result};
use crate::numerics::svd::svd;
use crate::numerics::Matrix;

/// A fitted linear projection onto leading principal directions.
///
/// `components` holds one direction per column, so projection is
/// `(x - mean) * components` and reconstruction is the transpose map back.
#[derive(Clone, Debug)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    pub components: Matrix,
    pub explained_variance: Vec<f64>,
}

fn validate(data: &Matrix, target_dim: usize) -> Result<()> {
    if data.rows() < 2 {
        return Err(Error::InvalidArgument(
            "PCA needs at least two rows to estimate variance".into(),
        ));
    }
    if target_dim == 0 {
        return Err(Error::InvalidArgument("PCA needs at least one component".into()));
    }
    if target_dim >= data.cols() {
        return Err(Error::Dimension(format!(
            "target dimension {} must be below the data dimension {}",
            target_dim,
            data.cols()
        )));
    }
    Ok(())
}

fn fit(data: &Matrix, target_dim: usize, complete: bool, center: bool) -> Result<(PcaModel, usize)> {
    validate(data, target_dim)?;
    let n = data.rows();
    let m = data.cols();

    let mut mean = vec![0.0; m];
    if center {
        for i in 0..n {
            for (acc, v) in mean.iter_mut().zip(data.row(i)) {
                *acc += v;
            }
        }
        for v in &mut mean {
            *v /= n as f64;
        }
    }

    // Factor the (optionally centered) data directly rather than its
    // covariance: this keeps small variance directions accurate and hands us
    // an orthonormal basis for the residual space for free.
    let centered = Matrix::from_fn(n, m, |i, j| data.get(i, j) - mean[j]);
    let dec = svd(&centered);
    let rank = dec.rank(n, m);
    if !complete && target_dim > rank {
        return Err(Error::RankDeficient { rank, requested: target_dim });
    }

    let genuine = rank.min(target_dim).min(dec.v.cols());
    let mut components = Matrix::zeros(m, target_dim);
    for j in 0..genuine {
        for i in 0..m {
            components.set(i, j, dec.v.get(i, j));
        }
    }
    // Directions beyond the numerical rank: orthonormalized residuals of a
    // fixed pseudo-random probe sequence. Unlike the factorization's own
    // near-null directions (pure noise) or canonical unit vectors (unstable
    // under symmetric ties), fixed generic probes depend continuously on the
    // retained subspace alone — two fits on near-identical subspaces agree
    // on the padding directions too.
    let mut probes = crate::seeding::stream(0x5eed_ba5e_0000_0001, &[m as u64]);
    for j in genuine..target_dim {
        loop {
            let mut r: Vec<f64> = (0..m).map(|_| rand::Rng::gen::<f64>(&mut probes) - 0.5).collect();
            for c in 0..j {
                let dot: f64 = (0..m).map(|i| components.get(i, c) * r[i]).sum();
                for (i, ri) in r.iter_mut().enumerate() {
                    *ri -= dot * components.get(i, c);
                }
            }
            let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-6 {
                for (i, ri) in r.iter().enumerate() {
                    components.set(i, j, ri / norm);
                }
                break;
            }
        }
    }

    let explained_variance = (0..target_dim)
        .map(|i| {
            if i >= genuine {
                return 0.0;
            }
            let s = dec.singular_values[i];
            s * s / (n as f64 - 1.0)
        })
        .collect();

    Ok((PcaModel { mean, components, explained_variance }, rank))
}

/// Fits a PCA with `target_dim` components to `data` (rows are samples).
///
/// Requesting more components than the centered data's numerical rank is a
/// rank-deficiency error; see [`pca_fit_completed`] for the total variant.
pub fn pca_fit(data: &Matrix, target_dim: usize) -> Result<PcaModel> {
    fit(data, target_dim, false, true).map(|(model, _)| model)
}

/// Like [`pca_fit`], but total on rank-deficient data: directions beyond the
/// numerical rank are filled with a deterministic orthonormal basis of the
/// residual space (their explained variance is reported as ~0). Returns the
/// model together with the data's numerical rank so callers can record how
/// many directions are genuine.
pub fn pca_fit_completed(data: &Matrix, target_dim: usize) -> Result<(PcaModel, usize)> {
    fit(data, target_dim, true, true)
}

/// Fits the dominant directions of the raw rows without removing the mean:
/// the returned model has a zero `mean` and `components` spanning the data's
/// leading row-space directions (`explained_variance` is measured about the
/// origin). Total on rank-deficient data like [`pca_fit_completed`], with the
/// same deterministic padding; returns the numerical rank alongside.
///
/// Two datasets whose rows occupy the same subspace get component bases of
/// exactly that subspace — differing only by a rotation — no matter where
/// each sample cloud sits inside it. Mean removal would break that: each
/// party's sample mean tilts its basis differently, so parties holding
/// differently-distributed rows of a common space would no longer agree.
/// Cross-party alignment of projections therefore uses this fit.
pub fn rowspace_fit_completed(data: &Matrix, target_dim: usize) -> Result<(PcaModel, usize)> {
    fit(data, target_dim, true, false)
}

impl PcaModel {
    /// Input dimensionality the model was fitted on.
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    /// Number of retained components.
    pub fn target_dim(&self) -> usize {
        self.components.cols()
    }

    /// Maps rows of `x` into the component space.
    pub fn project(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "expected {} columns, got {}",
                self.input_dim(),
                x.cols()
            )));
        }
        let centered = Matrix::from_fn(x.rows(), x.cols(), |i, j| x.get(i, j) - self.mean[j]);
        centered.matmul(&self.components)
    }

    /// Maps projected rows back to the original space (lossy for
    /// `target_dim < rank`).
    pub fn reconstruct(&self, z: &Matrix) -> Result<Matrix> {
        if z.cols() != self.target_dim() {
            return Err(Error::Dimension(format!(
                "expected {} columns, got {}",
                self.target_dim(),
                z.cols()
            )));
        }
        let back = z.matmul(&self.components.transpose())?;
        Ok(Matrix::from_fn(back.rows(), back.cols(), |i, j| back.get(i, j) + self.mean[j]))
    }
}
