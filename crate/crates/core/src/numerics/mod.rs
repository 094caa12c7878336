//! Linear algebra and clustering kernels used throughout the library.

mod kmeans;
mod matrix;
mod pca;
mod svd;

pub use kmeans::{kmeans, KmeansFit};
pub use matrix::Matrix;
pub use pca::{pca_fit, pca_fit_completed, rowspace_fit_completed, PcaModel};
pub use svd::{pinv, svd, svd_lowrank, SvdResult};
