//! Synthetic `(a, b, c)` data: two categorical attributes over {0, 1, 2}
//! plus one continuous attribute in [0, 1].
//!
//! Six of the nine `(a, b)` combinations are "normal", each tied to its own
//! truncated-Gaussian band of `c`; the remaining three combinations never
//! occur in normal data. Global anomalies are rows with extreme `c`
//! regardless of combination; local anomalies are rows whose combination is
//! forbidden, or whose `c` sits in a different combination's band.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::dataset::schema::{Record, Schema, Transform};
use crate::dataset::{sample_distinct, standard_normal, AnomalySpec, Label, LabeledDataset};
use crate::error::{Error, Result};

/// The normal `(a, b)` combinations with their `c`-band centers.
pub const NORMAL_COMBOS: [(usize, usize, f64); 6] = [
    (0, 0, 0.20),
    (0, 1, 0.32),
    (1, 1, 0.44),
    (1, 2, 0.56),
    (2, 0, 0.68),
    (2, 2, 0.80),
];

/// The `(a, b)` combinations reserved for local anomalies.
pub const FORBIDDEN_COMBOS: [(usize, usize); 3] = [(0, 2), (1, 0), (2, 1)];

/// Standard deviation of `c` around its combination's center.
pub const C_SIGMA: f64 = 0.08;

/// Half-width of a combination's `c` band (two standard deviations).
pub const C_BAND_HALF_WIDTH: f64 = 2.0 * C_SIGMA;

/// Normal rows keep `c` inside this global range; anything outside marks a
/// global anomaly.
const C_FLOOR: f64 = 0.1;
const C_CEIL: f64 = 0.9;

/// One raw sample before encoding.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticRow {
    pub a: usize,
    pub b: usize,
    pub c: f64,
}

impl SyntheticRow {
    /// The normal predicate: a normal combination with `c` inside that
    /// combination's band.
    pub fn is_normal(&self) -> bool {
        NORMAL_COMBOS.iter().any(|&(a, b, center)| {
            let (lo, hi) = band(center);
            a == self.a && b == self.b && (lo..=hi).contains(&self.c)
        })
    }
}

/// `c` band of a combination: two standard deviations around the center,
/// clipped to the global normal range.
pub fn band(center: f64) -> (f64, f64) {
    ((center - C_BAND_HALF_WIDTH).max(C_FLOOR), (center + C_BAND_HALF_WIDTH).min(C_CEIL))
}

/// Center whose band lies farthest from combination `i`'s center. All
/// center spacings exceed twice the band half-width, so the farthest band
/// never overlaps combination `i`'s own band.
fn farthest_combo(i: usize) -> usize {
    let center = NORMAL_COMBOS[i].2;
    (0..NORMAL_COMBOS.len())
        .max_by(|&p, &q| {
            let dp = (NORMAL_COMBOS[p].2 - center).abs();
            let dq = (NORMAL_COMBOS[q].2 - center).abs();
            dp.partial_cmp(&dq).unwrap().then(q.cmp(&p))
        })
        .unwrap()
}

fn truncated_c(rng: &mut ChaCha12Rng, center: f64) -> f64 {
    let (lo, hi) = band(center);
    loop {
        let c = center + C_SIGMA * standard_normal(rng);
        if (lo..=hi).contains(&c) {
            return c;
        }
    }
}

/// The fixed schema of the synthetic family: closed vocabularies
/// {0, 1, 2} for `a` and `b` plus the raw `c` column (width 3+3+1 = 7).
pub fn synthetic_schema() -> Schema {
    let vocab = || vec!["0".to_string(), "1".to_string(), "2".to_string()];
    Schema {
        groups: vec![
            crate::dataset::CategoricalGroup { name: "a".into(), vocab: vocab(), open: false },
            crate::dataset::CategoricalGroup { name: "b".into(), vocab: vocab(), open: false },
        ],
        continuous: vec![crate::dataset::ContinuousFeature {
            name: "c".into(),
            transform: Transform::None,
            min: 0.0,
            max: 1.0,
        }],
    }
}

fn to_record(row: &SyntheticRow) -> Record {
    Record {
        categories: vec![row.a.to_string(), row.b.to_string()],
        values: vec![row.c],
    }
}

/// Recovers the raw `(a, b, c)` triple from an encoded row. Exact for rows
/// produced by the synthetic schema: the categorical blocks are one-hot and
/// `c` is stored unscaled.
pub fn decode_row(schema: &Schema, row: &[f64]) -> SyntheticRow {
    let a = schema.decode_category(row, 0).parse().expect("synthetic vocab is numeric");
    let b = schema.decode_category(row, 1).parse().expect("synthetic vocab is numeric");
    SyntheticRow { a, b, c: row[schema.dim() - 1] }
}

/// Decodes every row of an encoded synthetic dataset.
pub fn decode_rows(data: &crate::dataset::LabeledDataset) -> Vec<SyntheticRow> {
    (0..data.len()).map(|i| decode_row(&data.schema, data.features.row(i))).collect()
}

/// Generates `n` normal samples: combination uniform over the normal set,
/// `c` from that combination's truncated-Gaussian band.
pub fn gen_synthetic_normal(n: usize, seed: u64) -> Result<LabeledDataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let schema = synthetic_schema();
    let mut records = Vec::with_capacity(n);
    for _ in 0..n {
        let (a, b, center) = NORMAL_COMBOS[rng.gen_range(0..NORMAL_COMBOS.len())];
        let c = truncated_c(&mut rng, center);
        records.push(to_record(&SyntheticRow { a, b, c }));
    }
    let features = schema.encode(&records)?;
    let labels = vec![Label::Normal; n];
    LabeledDataset::new(schema, features, labels)
}

/// Replaces rows of an all-normal test set with anomalies.
///
/// Globals keep a valid combination but draw `c` outside [0.1, 0.9]; locals
/// either use a forbidden combination (with an unremarkable `c`) or keep a
/// valid combination while drawing `c` from the farthest combination's band.
pub fn inject_synthetic_anomalies(
    test: &LabeledDataset,
    spec: &AnomalySpec,
    seed: u64,
) -> Result<LabeledDataset> {
    if test.labels.iter().any(|l| l.is_anomaly()) {
        return Err(Error::InvalidArgument("injection input must be all-normal".into()));
    }
    if spec.total() > test.len() {
        return Err(Error::InvalidArgument(format!(
            "{} anomalies requested for {} rows",
            spec.total(),
            test.len()
        )));
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let targets = sample_distinct(&mut rng, test.len(), spec.total())?;

    let mut features = test.features.clone();
    let mut labels = test.labels.clone();
    for (k, &idx) in targets.iter().enumerate() {
        let (row, label) = if k < spec.n_global {
            let (a, b, _) = NORMAL_COMBOS[rng.gen_range(0..NORMAL_COMBOS.len())];
            let c = if rng.gen::<bool>() {
                rng.gen::<f64>() * (C_FLOOR - 0.005)
            } else {
                C_CEIL + 0.005 + rng.gen::<f64>() * (1.0 - C_CEIL - 0.005)
            };
            (SyntheticRow { a, b, c }, Label::Global)
        } else if rng.gen::<bool>() {
            // Forbidden combination; c drawn from some normal band so the
            // anomaly is invisible to a marginal look at c.
            let (a, b) = FORBIDDEN_COMBOS[rng.gen_range(0..FORBIDDEN_COMBOS.len())];
            let center = NORMAL_COMBOS[rng.gen_range(0..NORMAL_COMBOS.len())].2;
            (SyntheticRow { a, b, c: truncated_c(&mut rng, center) }, Label::Local)
        } else {
            // Valid combination, c from the farthest band.
            let combo = rng.gen_range(0..NORMAL_COMBOS.len());
            let (a, b, _) = NORMAL_COMBOS[combo];
            let c = truncated_c(&mut rng, NORMAL_COMBOS[farthest_combo(combo)].2);
            (SyntheticRow { a, b, c }, Label::Local)
        };
        let encoded = test.schema.encode(&[to_record(&row)])?;
        features.row_mut(idx).copy_from_slice(encoded.row(0));
        labels[idx] = label;
    }

    LabeledDataset::new(test.schema.clone(), features, labels)
}
