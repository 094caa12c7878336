//! Data generation, ingestion, encoding, and anomaly injection.
//!
//! Two data families are supported: a small synthetic family of
//! `(a, b, c)` records (two categorical attributes over {0,1,2} plus one
//! continuous attribute) and double-entry journal records
//! (debit account, credit account, amount). Both are encoded into a shared
//! numeric feature space — one-hot categorical blocks plus normalized
//! continuous columns — in which every training regime operates.

mod io;
mod journal;
mod schema;
mod synthetic;

pub use io::{
    load_journal_csv, load_labeled_journal_csv, load_labeled_synthetic_csv, write_journal_csv,
    write_labeled_journal_csv, write_labeled_synthetic_csv,
};
pub use journal::{
    encode_entries, fit_schema, gen_journal_corpus, inject_journal_anomalies,
    inject_journal_anomalies_with, JournalAnomalyPlan, JournalConfig, JournalEntry,
    JournalGenerator,
};
pub use schema::{CategoricalGroup, ContinuousFeature, Record, Schema, Transform};
pub use synthetic::{
    decode_row, decode_rows, gen_synthetic_normal, inject_synthetic_anomalies, synthetic_schema,
    SyntheticRow, C_BAND_HALF_WIDTH, C_SIGMA, FORBIDDEN_COMBOS, NORMAL_COMBOS,
};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Per-sample anomaly label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Normal,
    /// Individually extreme attribute values (e.g. outlier amount).
    Global,
    /// Abnormal attribute combination (e.g. implausible account pair).
    Local,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Normal => "normal",
            Label::Global => "global",
            Label::Local => "local",
        }
    }

    pub fn parse(s: &str) -> Option<Label> {
        match s {
            "normal" => Some(Label::Normal),
            "global" => Some(Label::Global),
            "local" => Some(Label::Local),
            _ => None,
        }
    }

    pub fn is_anomaly(self) -> bool {
        !matches!(self, Label::Normal)
    }
}

/// An encoded sample matrix with its schema and per-row labels.
#[derive(Clone, Debug)]
pub struct LabeledDataset {
    pub schema: Schema,
    pub features: Matrix,
    pub labels: Vec<Label>,
}

impl LabeledDataset {
    pub fn new(schema: Schema, features: Matrix, labels: Vec<Label>) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::Dimension(format!(
                "{} feature rows vs {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if features.cols() != schema.dim() {
            return Err(Error::Schema(format!(
                "features have width {} but schema encodes to {}",
                features.cols(),
                schema.dim()
            )));
        }
        Ok(LabeledDataset { schema, features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Copies the given rows (and their labels) into a new dataset.
    pub fn select_rows(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            schema: self.schema.clone(),
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// How many rows of a test set to replace with anomalies, split by type.
#[derive(Clone, Copy, Debug)]
pub struct AnomalySpec {
    /// Fraction of the test set turned anomalous.
    pub ratio: f64,
    pub n_global: usize,
    pub n_local: usize,
}

impl AnomalySpec {
    /// Splits `round(ratio * test_size)` anomalies evenly between global and
    /// local (local takes the odd one).
    pub fn for_test_size(ratio: f64, test_size: usize) -> Result<AnomalySpec> {
        if !(0.0..1.0).contains(&ratio) {
            return Err(Error::InvalidArgument(format!("anomaly ratio {} outside [0,1)", ratio)));
        }
        let total = (ratio * test_size as f64).round() as usize;
        if total > test_size {
            return Err(Error::InvalidArgument("anomaly count exceeds test size".into()));
        }
        let n_global = total / 2;
        Ok(AnomalySpec { ratio, n_global, n_local: total - n_global })
    }

    pub fn total(&self) -> usize {
        self.n_global + self.n_local
    }
}

/// Standard normal draw via Box-Muller (rand's own distributions crate is
/// not pulled in for this one function).
pub(crate) fn standard_normal(rng: &mut impl rand::Rng) -> f64 {
    loop {
        let u1: f64 = rng.gen();
        if u1 <= f64::MIN_POSITIVE {
            continue;
        }
        let u2: f64 = rng.gen();
        return (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
    }
}

/// Samples `count` distinct indices from `0..n` (ascending order is NOT
/// preserved; the draw order is the stream order).
pub(crate) fn sample_distinct(
    rng: &mut impl rand::Rng,
    n: usize,
    count: usize,
) -> Result<Vec<usize>> {
    if count > n {
        return Err(Error::InvalidArgument(format!("cannot sample {} of {} indices", count, n)));
    }
    // Partial Fisher-Yates over the index range.
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..count {
        let j = rng.gen_range(i..n);
        pool.swap(i, j);
    }
    pool.truncate(count);
    Ok(pool)
}
