//! Cross-organization anomaly detection on double-entry bookkeeping data.
//!
//! Several organizations each hold a private ledger of journal entries and
//! want to detect anomalous entries jointly, without revealing raw records —
//! and, unlike classic federated learning, without repeatedly shipping model
//! parameters around. The centerpiece is a collaboration scheme in which each
//! organization shares only a dimensionality-reduced view of its data plus
//! its view of a common synthetic anchor set; a coordinator aligns those
//! views into one space, and a single autoencoder trained there scores
//! anomalies by reconstruction error.
//!
//! The crate also implements the reference points such a scheme is judged
//! against — per-organization training, centralized pooling, and two
//! parameter-averaging federated baselines — plus data generators, non-i.i.d.
//! partitioners, and evaluation utilities, so that full comparison
//! experiments can be driven from one config file.

pub mod autoencoder;
pub mod dataset;
pub mod dc;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod federated;
pub mod numerics;
pub mod partition;
pub mod seeding;

pub use error::{Error, Result};
pub use numerics::Matrix;
