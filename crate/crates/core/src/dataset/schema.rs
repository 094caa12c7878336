//! Feature schema: how raw records become numeric vectors.

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Reserved vocabulary token that absorbs unseen categorical values in open
/// groups.
pub const OTHER_TOKEN: &str = "<other>";

/// Transform applied to a continuous value before min-max normalization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Transform {
    None,
    /// `ln(1 + v)`; used for heavy-tailed positive values such as amounts.
    Log1p,
}

impl Transform {
    fn apply(self, v: f64) -> f64 {
        match self {
            Transform::None => v,
            Transform::Log1p => v.ln_1p(),
        }
    }
}

/// One categorical attribute encoded as a one-hot block.
///
/// An `open` group reserves its final vocabulary slot ([`OTHER_TOKEN`]) for
/// values never seen at fit time; a closed group rejects them.
#[derive(Clone, Debug)]
pub struct CategoricalGroup {
    pub name: String,
    pub vocab: Vec<String>,
    pub open: bool,
}

impl CategoricalGroup {
    pub fn width(&self) -> usize {
        self.vocab.len()
    }

    fn index_of(&self, token: &str) -> Result<usize> {
        if let Ok(i) = self.vocab.binary_search_by(|v| v.as_str().cmp(token)) {
            return Ok(i);
        }
        if self.open {
            // The sentinel sorts before alphabetic tokens, so find it rather
            // than assuming a position.
            return self
                .vocab
                .iter()
                .position(|v| v == OTHER_TOKEN)
                .ok_or_else(|| Error::Schema(format!("open group {} lost its slot", self.name)));
        }
        Err(Error::Schema(format!("token {:?} not in vocabulary of group {}", token, self.name)))
    }
}

/// One continuous attribute with its normalization bounds (post-transform).
#[derive(Clone, Debug)]
pub struct ContinuousFeature {
    pub name: String,
    pub transform: Transform,
    pub min: f64,
    pub max: f64,
}

impl ContinuousFeature {
    /// Transforms then min-max normalizes against the fitted bounds. Values
    /// inside the training range land in [0, 1]; out-of-range values extend
    /// linearly beyond it on purpose — an amount far above anything seen in
    /// training must stay far out in feature space, not be folded back onto
    /// the training maximum, or a reconstruction detector could never rank
    /// it above ordinary large values.
    fn encode(&self, v: f64) -> f64 {
        let t = self.transform.apply(v);
        (t - self.min) / (self.max - self.min)
    }
}

/// A raw record ready for encoding: one token per categorical group and one
/// value per continuous feature, in schema order.
#[derive(Clone, Debug)]
pub struct Record {
    pub categories: Vec<String>,
    pub values: Vec<f64>,
}

/// Ordered feature layout shared by every organization in a run.
#[derive(Clone, Debug)]
pub struct Schema {
    pub groups: Vec<CategoricalGroup>,
    pub continuous: Vec<ContinuousFeature>,
}

impl Schema {
    /// Fits vocabularies and normalization bounds from training records.
    ///
    /// `group_specs` gives `(name, open)` per categorical position and
    /// `continuous_specs` gives `(name, transform)` per continuous position.
    pub fn fit(
        records: &[Record],
        group_specs: &[(&str, bool)],
        continuous_specs: &[(&str, Transform)],
    ) -> Result<Schema> {
        if records.is_empty() {
            return Err(Error::InvalidArgument("cannot fit a schema on zero records".into()));
        }
        for (i, r) in records.iter().enumerate() {
            if r.categories.len() != group_specs.len() || r.values.len() != continuous_specs.len()
            {
                return Err(Error::Schema(format!("record {} does not match the field layout", i)));
            }
        }

        let mut groups = Vec::with_capacity(group_specs.len());
        for (g, &(name, open)) in group_specs.iter().enumerate() {
            let mut vocab: Vec<String> =
                records.iter().map(|r| r.categories[g].clone()).collect();
            vocab.sort();
            vocab.dedup();
            if vocab.iter().any(|v| v == OTHER_TOKEN) {
                return Err(Error::Schema(format!(
                    "group {} contains the reserved token {:?}",
                    name, OTHER_TOKEN
                )));
            }
            if open {
                vocab.push(OTHER_TOKEN.to_string());
                vocab.sort();
            }
            groups.push(CategoricalGroup { name: name.to_string(), vocab, open });
        }

        let mut continuous = Vec::with_capacity(continuous_specs.len());
        for (c, &(name, transform)) in continuous_specs.iter().enumerate() {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for r in records {
                let t = transform.apply(r.values[c]);
                if !t.is_finite() {
                    return Err(Error::Validation(format!(
                        "continuous feature {} has a non-finite transformed value",
                        name
                    )));
                }
                lo = lo.min(t);
                hi = hi.max(t);
            }
            if lo >= hi {
                return Err(Error::Validation(format!(
                    "continuous feature {} is constant on the training data",
                    name
                )));
            }
            continuous.push(ContinuousFeature { name: name.to_string(), transform, min: lo, max: hi });
        }

        Ok(Schema { groups, continuous })
    }

    /// Total encoded width: sum of one-hot block widths plus one column per
    /// continuous feature.
    pub fn dim(&self) -> usize {
        self.groups.iter().map(|g| g.width()).sum::<usize>() + self.continuous.len()
    }

    /// `(start, len)` of each one-hot block in the encoded layout.
    pub fn categorical_blocks(&self) -> Vec<(usize, usize)> {
        let mut blocks = Vec::with_capacity(self.groups.len());
        let mut offset = 0;
        for g in &self.groups {
            blocks.push((offset, g.width()));
            offset += g.width();
        }
        blocks
    }

    /// Encoded column index of each continuous feature.
    pub fn continuous_columns(&self) -> Vec<usize> {
        let base: usize = self.groups.iter().map(|g| g.width()).sum();
        (0..self.continuous.len()).map(|c| base + c).collect()
    }

    /// Encodes records into an `n x dim()` matrix.
    pub fn encode(&self, records: &[Record]) -> Result<Matrix> {
        let mut out = Matrix::zeros(records.len(), self.dim());
        for (i, r) in records.iter().enumerate() {
            if r.categories.len() != self.groups.len() || r.values.len() != self.continuous.len()
            {
                return Err(Error::Schema(format!("record {} does not match the field layout", i)));
            }
            let row = out.row_mut(i);
            let mut offset = 0;
            for (g, group) in self.groups.iter().enumerate() {
                row[offset + group.index_of(&r.categories[g])?] = 1.0;
                offset += group.width();
            }
            for (c, feat) in self.continuous.iter().enumerate() {
                row[offset + c] = feat.encode(r.values[c]);
            }
        }
        Ok(out)
    }

    /// Recovers the token of group `g` from an encoded row (argmax over the
    /// block), the inverse of `encode` on one-hot data.
    pub fn decode_category(&self, row: &[f64], g: usize) -> &str {
        let (start, len) = self.categorical_blocks()[g];
        let mut best = 0;
        for j in 1..len {
            if row[start + j] > row[start + best] {
                best = j;
            }
        }
        &self.groups[g].vocab[best]
    }
}
