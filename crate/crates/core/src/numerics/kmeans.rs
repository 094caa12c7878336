//! Lloyd's k-means with k-means++ seeding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Result of a k-means run on a row-sample matrix.
#[derive(Clone, Debug)]
pub struct KmeansFit {
    /// Cluster index per input row.
    pub assignments: Vec<usize>,
    /// One centroid per row, `k x dim`.
    pub centroids: Matrix,
    /// Sum of squared distances from each row to its assigned centroid.
    pub inertia: f64,
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

const MAX_ITERS: usize = 300;

/// Clusters the rows of `data` into `k` groups.
///
/// Seeding is k-means++ driven by a ChaCha stream keyed on `seed`, and the
/// Lloyd iteration runs to a fixed point (or 300 iterations). A cluster that
/// empties out is re-seeded with the point currently farthest from its own
/// centroid, so the routine always returns `k` non-empty clusters unless the
/// data has fewer than `k` distinct rows.
pub fn kmeans(data: &Matrix, k: usize, seed: u64) -> Result<KmeansFit> {
    let n = data.rows();
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if n < k {
        return Err(Error::InvalidArgument(format!("cannot form {} clusters from {} rows", k, n)));
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    // k-means++: first centroid uniform, then proportional to squared
    // distance from the nearest centroid chosen so far.
    let mut centers: Vec<usize> = vec![rng.gen_range(0..n)];
    let mut nearest_sq: Vec<f64> =
        (0..n).map(|i| dist_sq(data.row(i), data.row(centers[0]))).collect();
    while centers.len() < k {
        let total: f64 = nearest_sq.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in nearest_sq.iter().enumerate() {
                target -= d;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // All remaining rows coincide with a centroid; take the first
            // row not yet used so the centroid count still reaches k.
            match (0..n).find(|i| !centers.contains(i)) {
                Some(i) => i,
                None => return Err(Error::Clustering("fewer rows than clusters".into())),
            }
        };
        centers.push(pick);
        for i in 0..n {
            let d = dist_sq(data.row(i), data.row(pick));
            if d < nearest_sq[i] {
                nearest_sq[i] = d;
            }
        }
    }

    let dim = data.cols();
    let mut centroids = Matrix::zeros(k, dim);
    for (c, &row) in centers.iter().enumerate() {
        centroids.row_mut(c).copy_from_slice(data.row(row));
    }

    let mut assignments = vec![0usize; n];
    for _ in 0..MAX_ITERS {
        // Assignment step; ties go to the lowest cluster index.
        let mut changed = false;
        for i in 0..n {
            let mut best = 0;
            let mut best_d = dist_sq(data.row(i), centroids.row(0));
            for c in 1..k {
                let d = dist_sq(data.row(i), centroids.row(c));
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if assignments[i] != best {
                assignments[i] = best;
                changed = true;
            }
        }

        // Re-seed any emptied cluster with the point farthest from its
        // current centroid, taken from a cluster that can spare one.
        let mut counts = vec![0usize; k];
        for &a in &assignments {
            counts[a] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| counts[assignments[i]] > 1)
                .max_by(|&i, &j| {
                    let di = dist_sq(data.row(i), centroids.row(assignments[i]));
                    let dj = dist_sq(data.row(j), centroids.row(assignments[j]));
                    di.partial_cmp(&dj).unwrap().then(j.cmp(&i))
                });
            match far {
                Some(i) => {
                    counts[assignments[i]] -= 1;
                    assignments[i] = c;
                    counts[c] = 1;
                    changed = true;
                }
                None => return Err(Error::Clustering(format!("cluster {} emptied out", c))),
            }
        }

        if !changed {
            break;
        }

        // Update step.
        let mut sums = Matrix::zeros(k, dim);
        for i in 0..n {
            let c = assignments[i];
            for (acc, v) in sums.row_mut(c).iter_mut().zip(data.row(i)) {
                *acc += v;
            }
        }
        for c in 0..k {
            let count = counts[c] as f64;
            for (dst, &s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                *dst = s / count;
            }
        }
    }

    let inertia = (0..n).map(|i| dist_sq(data.row(i), centroids.row(assignments[i]))).sum();
    Ok(KmeansFit { assignments, centroids, inertia })
}
