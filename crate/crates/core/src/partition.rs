//! Splitting a pooled training set into per-organization datasets.
//!
//! Two regimes matter for cross-organization experiments: homogeneous
//! (`iid`) splits that deal shuffled rows into near-equal parts, and
//! heterogeneous (`noniid_kmeans`) splits that cluster the feature rows and
//! hand each whole cluster to one organization. A third mode, `natural`,
//! covers corpora that are already per-organization and therefore never go
//! through a splitter.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::numerics::kmeans;
use crate::seeding;

/// How a training pool is distributed across organizations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PartitionMode {
    /// Shuffle and deal into near-equal parts.
    Iid,
    /// Cluster the rows; each cluster becomes one organization.
    NoniidKmeans,
    /// Data is already organized per organization; nothing to split.
    Natural,
}

impl PartitionMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "iid" => Some(PartitionMode::Iid),
            "noniid_kmeans" => Some(PartitionMode::NoniidKmeans),
            "natural" => Some(PartitionMode::Natural),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            PartitionMode::Iid => "iid",
            PartitionMode::NoniidKmeans => "noniid_kmeans",
            PartitionMode::Natural => "natural",
        }
    }
}

/// A validated description of one partitioning run.
#[derive(Clone, Copy, Debug)]
pub struct PartitionPlan {
    pub mode: PartitionMode,
    pub org_count: usize,
    pub seed: u64,
}

impl PartitionPlan {
    pub fn new(mode: PartitionMode, org_count: usize, seed: u64) -> Result<Self> {
        if mode != PartitionMode::Natural && org_count < 2 {
            return Err(Error::InvalidArgument(format!(
                "{} partitioning needs at least 2 organizations",
                mode.as_str()
            )));
        }
        Ok(PartitionPlan { mode, org_count, seed })
    }

    /// Computes which pooled rows each organization receives, without
    /// materializing the per-organization datasets. `Natural` plans
    /// describe corpora that are already per-organization, so applying one
    /// to a pool is an error.
    pub fn assign(&self, data: &LabeledDataset) -> Result<Vec<Vec<usize>>> {
        match self.mode {
            PartitionMode::Iid => assign_iid(data, self.org_count, self.seed),
            PartitionMode::NoniidKmeans => assign_noniid_kmeans(data, self.org_count, self.seed),
            PartitionMode::Natural => Err(Error::InvalidArgument(
                "natural mode expects per-organization corpora, not a pooled set".into(),
            )),
        }
    }

    /// Runs the plan on a pooled dataset.
    pub fn split(&self, data: &LabeledDataset) -> Result<Vec<LabeledDataset>> {
        Ok(self.assign(data)?.iter().map(|rows| data.select_rows(rows)).collect())
    }
}

/// Row indices per organization after a shuffle-and-deal: contiguous parts
/// of a shuffled order, sizes differing by at most one (leading parts take
/// the remainder).
pub fn assign_iid(data: &LabeledDataset, orgs: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let n = data.len();
    if orgs == 0 || orgs > n {
        return Err(Error::InvalidArgument(format!("cannot split {} rows into {} parts", n, orgs)));
    }
    if data.labels.iter().any(|l| l.is_anomaly()) {
        return Err(Error::InvalidArgument("training pool must be all-normal".into()));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for i in 0..n.saturating_sub(1) {
        let j = rng.gen_range(i..n);
        order.swap(i, j);
    }

    let base = n / orgs;
    let remainder = n % orgs;
    let mut parts = Vec::with_capacity(orgs);
    let mut cursor = 0;
    for org in 0..orgs {
        let size = base + (org < remainder) as usize;
        parts.push(order[cursor..cursor + size].to_vec());
        cursor += size;
    }
    Ok(parts)
}

/// Shuffles the rows and deals them into `orgs` contiguous parts whose sizes
/// differ by at most one (leading parts take the remainder).
pub fn split_iid(data: &LabeledDataset, orgs: usize, seed: u64) -> Result<Vec<LabeledDataset>> {
    Ok(assign_iid(data, orgs, seed)?.iter().map(|rows| data.select_rows(rows)).collect())
}

/// Row indices per organization after clustering: each cluster goes whole
/// to one organization, largest cluster first. A clustering failure (an
/// empty cluster that cannot be re-seeded) is retried once with a derived
/// seed.
pub fn assign_noniid_kmeans(
    data: &LabeledDataset,
    orgs: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    let n = data.len();
    if orgs == 0 || orgs > n {
        return Err(Error::InvalidArgument(format!("cannot split {} rows into {} parts", n, orgs)));
    }
    if data.labels.iter().any(|l| l.is_anomaly()) {
        return Err(Error::InvalidArgument("training pool must be all-normal".into()));
    }

    let fit = match kmeans(&data.features, orgs, seed) {
        Ok(fit) => fit,
        Err(Error::Clustering(_)) => kmeans(&data.features, orgs, seeding::derive(seed, &[1]))?,
        Err(e) => return Err(e),
    };

    let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); orgs];
    for (row, &c) in fit.assignments.iter().enumerate() {
        clusters[c].push(row);
    }
    // Largest cluster goes to organization 0; ties keep cluster order.
    let mut by_size: Vec<usize> = (0..orgs).collect();
    by_size.sort_by_key(|&c| (std::cmp::Reverse(clusters[c].len()), c));

    Ok(by_size.iter().map(|&c| clusters[c].clone()).collect())
}

/// Clusters the feature rows into `orgs` groups and hands each cluster to
/// one organization, largest cluster first.
pub fn split_noniid_kmeans(
    data: &LabeledDataset,
    orgs: usize,
    seed: u64,
) -> Result<Vec<LabeledDataset>> {
    Ok(assign_noniid_kmeans(data, orgs, seed)?.iter().map(|rows| data.select_rows(rows)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{gen_synthetic_normal, Label};
    use crate::dataset::{ContinuousFeature, Schema, Transform};
    use crate::numerics::Matrix;

    fn two_blobs() -> LabeledDataset {
        let schema = Schema {
            groups: vec![],
            continuous: vec![
                ContinuousFeature {
                    name: "x".into(),
                    transform: Transform::None,
                    min: 0.0,
                    max: 1.0,
                },
                ContinuousFeature {
                    name: "y".into(),
                    transform: Transform::None,
                    min: 0.0,
                    max: 1.0,
                },
            ],
        };
        let mut rows = Vec::new();
        for i in 0..30 {
            let jitter = i as f64 * 1e-3;
            rows.push(vec![0.1 + jitter, 0.1]);
        }
        for i in 0..10 {
            let jitter = i as f64 * 1e-3;
            rows.push(vec![0.9 - jitter, 0.9]);
        }
        let features = Matrix::from_rows(&rows).unwrap();
        LabeledDataset::new(schema, features, vec![Label::Normal; 40]).unwrap()
    }

    #[test]
    fn iid_sizes_differ_by_at_most_one_and_cover_input() {
        let data = gen_synthetic_normal(1601, 3).unwrap();
        let parts = split_iid(&data, 8, 9).unwrap();
        let sizes: Vec<usize> = parts.iter().map(|p| p.len()).collect();
        assert_eq!(sizes, vec![201, 200, 200, 200, 200, 200, 200, 200]);

        let total_sum: f64 = parts.iter().map(|p| p.features.data().iter().sum::<f64>()).sum();
        let pool_sum: f64 = data.features.data().iter().sum();
        assert!((total_sum - pool_sum).abs() < 1e-9);
    }

    #[test]
    fn iid_single_org_is_identity() {
        let data = gen_synthetic_normal(25, 5).unwrap();
        let parts = split_iid(&data, 1, 7).unwrap();
        assert_eq!(parts.len(), 1);
        assert_eq!(parts[0].len(), 25);
        // Same multiset of rows: compare per-coordinate sums.
        let a: f64 = parts[0].features.data().iter().sum();
        let b: f64 = data.features.data().iter().sum();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn iid_rejects_bad_inputs() {
        let data = gen_synthetic_normal(5, 1).unwrap();
        assert!(matches!(split_iid(&data, 6, 0), Err(Error::InvalidArgument(_))));
        assert!(matches!(split_iid(&data, 0, 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn kmeans_split_separates_blobs_largest_first() {
        let data = two_blobs();
        let parts = split_noniid_kmeans(&data, 2, 11).unwrap();
        assert_eq!(parts[0].len(), 30);
        assert_eq!(parts[1].len(), 10);
        // Each part is pure: all x-coordinates on one side.
        assert!(parts[0].features.col(0).iter().all(|&x| x < 0.5));
        assert!(parts[1].features.col(0).iter().all(|&x| x > 0.5));
    }

    #[test]
    fn splits_are_deterministic() {
        let data = gen_synthetic_normal(200, 17).unwrap();
        let a = split_noniid_kmeans(&data, 4, 3).unwrap();
        let b = split_noniid_kmeans(&data, 4, 3).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.features, y.features);
        }
    }

    #[test]
    fn assignments_cover_the_pool_disjointly() {
        let data = gen_synthetic_normal(101, 23).unwrap();
        for assign in [
            assign_iid(&data, 7, 4).unwrap(),
            assign_noniid_kmeans(&data, 3, 4).unwrap(),
        ] {
            let mut seen = vec![false; data.len()];
            for rows in &assign {
                for &r in rows {
                    assert!(!seen[r], "row {} assigned twice", r);
                    seen[r] = true;
                }
            }
            assert!(seen.iter().all(|&s| s), "some rows were dropped");
        }
    }

    #[test]
    fn plan_validates_org_count() {
        assert!(PartitionPlan::new(PartitionMode::Iid, 1, 0).is_err());
        assert!(PartitionPlan::new(PartitionMode::Natural, 1, 0).is_ok());
        let plan = PartitionPlan::new(PartitionMode::Natural, 3, 0).unwrap();
        let data = gen_synthetic_normal(10, 1).unwrap();
        assert!(plan.split(&data).is_err());
    }
}
