//! Feed-forward autoencoder with reconstruction-error scoring.
//!
//! Two output regimes cover the two kinds of inputs that occur in the
//! pipeline: raw encoded records (one-hot blocks plus normalized amounts)
//! use a mixed head — per-block softmax trained with binary cross-entropy
//! plus squared error on the continuous columns — while collaboration-space
//! representations use a plain linear head with mean squared error. Hidden
//! layers are ReLU throughout; the per-sample training loss doubles as the
//! anomaly score.

mod train;

pub use train::{loss_and_gradients, train, Trainer, TrainConfig};

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::dataset::Schema;
use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Where each categorical block and continuous column sits in the encoded
/// row, for mixed-head activations and losses.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeadLayout {
    /// `(start, width)` of each categorical block; softmax + binary
    /// cross-entropy applies per block.
    pub blocks: Vec<(usize, usize)>,
    /// Columns carrying continuous values; linear + squared error.
    pub continuous: Vec<usize>,
}

impl HeadLayout {
    pub fn from_schema(schema: &Schema) -> Self {
        HeadLayout {
            blocks: schema.categorical_blocks(),
            continuous: schema.continuous_columns(),
        }
    }

    /// Checks that blocks and continuous columns tile `dim` exactly once.
    fn validate(&self, dim: usize) -> Result<()> {
        let mut covered = vec![false; dim];
        for &(start, width) in &self.blocks {
            if width < 2 {
                return Err(Error::Validation(format!(
                    "categorical block at {} has width {}, need at least 2",
                    start, width
                )));
            }
            for i in start..start + width {
                if i >= dim || covered[i] {
                    return Err(Error::Validation(format!(
                        "categorical block at {} overflows or overlaps",
                        start
                    )));
                }
                covered[i] = true;
            }
        }
        for &c in &self.continuous {
            if c >= dim || covered[c] {
                return Err(Error::Validation(format!(
                    "continuous column {} overflows or overlaps",
                    c
                )));
            }
            covered[c] = true;
        }
        if covered.iter().any(|&c| !c) {
            return Err(Error::Validation(
                "head layout leaves output coordinates uncovered".into(),
            ));
        }
        Ok(())
    }
}

/// Output-layer regime.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OutputHead {
    /// Linear output; per-sample loss is the mean squared error over all
    /// coordinates.
    Identity,
    /// Per-block softmax with binary cross-entropy plus squared error on
    /// continuous columns.
    Mixed(HeadLayout),
}

/// Layer widths plus the output regime.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AeArchitecture {
    pub layer_sizes: Vec<usize>,
    pub head: OutputHead,
}

impl AeArchitecture {
    pub fn new(layer_sizes: Vec<usize>, head: OutputHead) -> Result<Self> {
        let arch = AeArchitecture { layer_sizes, head };
        arch.validate()?;
        Ok(arch)
    }

    /// The shallow stack: `[io, 6, 4, 2, 4, 6, io]`.
    pub fn small(io: usize, head: OutputHead) -> Result<Self> {
        AeArchitecture::new(vec![io, 6, 4, 2, 4, 6, io], head)
    }

    /// The deep stack: `[io, 128, 64, 32, 16, 8, 4, 8, 16, 32, 64, 128, io]`.
    pub fn deep(io: usize, head: OutputHead) -> Result<Self> {
        AeArchitecture::new(vec![io, 128, 64, 32, 16, 8, 4, 8, 16, 32, 64, 128, io], head)
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    fn validate(&self) -> Result<()> {
        let l = self.layer_sizes.len();
        if l < 3 {
            return Err(Error::Validation(format!(
                "need at least input, bottleneck and output layers, got {}",
                l
            )));
        }
        if self.layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::Validation("zero-width layer".into()));
        }
        for i in 0..l / 2 {
            if self.layer_sizes[i] != self.layer_sizes[l - 1 - i] {
                return Err(Error::Validation(format!(
                    "encoder/decoder asymmetry: layer {} is {} but layer {} is {}",
                    i,
                    self.layer_sizes[i],
                    l - 1 - i,
                    self.layer_sizes[l - 1 - i]
                )));
            }
        }
        if let OutputHead::Mixed(layout) = &self.head {
            layout.validate(self.layer_sizes[l - 1])?;
        }
        Ok(())
    }
}

/// A concrete parameterization of an [`AeArchitecture`].
#[derive(Clone, Debug)]
pub struct AeModel {
    pub arch: AeArchitecture,
    /// One `fan_in x fan_out` matrix per layer transition.
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
    pub init_seed: u64,
}

/// Initializes a model with Glorot-uniform weights and zero biases.
pub fn init_model(arch: &AeArchitecture, seed: u64) -> Result<AeModel> {
    arch.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for w in arch.layer_sizes.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        weights.push(Matrix::from_fn(fan_in, fan_out, |_, _| {
            (rng.gen::<f64>() * 2.0 - 1.0) * limit
        }));
        biases.push(vec![0.0; fan_out]);
    }
    Ok(AeModel { arch: arch.clone(), weights, biases, init_seed: seed })
}

/// Numerical floor keeping cross-entropy terms finite when a softmax output
/// saturates.
const PROB_FLOOR: f64 = 1e-7;

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

impl AeModel {
    fn check_width(&self, batch: &Matrix) -> Result<()> {
        let want = self.arch.input_dim();
        if batch.cols() != want {
            return Err(Error::Dimension(format!(
                "batch has {} columns but the model expects {}",
                batch.cols(),
                want
            )));
        }
        Ok(())
    }

    /// Applies the output head's activations in place on the final linear
    /// layer's rows.
    fn apply_head(&self, out: &mut Matrix) {
        if let OutputHead::Mixed(layout) = &self.arch.head {
            for i in 0..out.rows() {
                let row = out.row_mut(i);
                for &(start, width) in &layout.blocks {
                    let block = &mut row[start..start + width];
                    let max = block.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let mut total = 0.0;
                    for v in block.iter_mut() {
                        *v = (*v - max).exp();
                        total += *v;
                    }
                    for v in block.iter_mut() {
                        *v /= total;
                    }
                }
            }
        }
    }

    /// Runs the network, returning every layer's activations (input first,
    /// head output last). Used by training; [`AeModel::forward`] keeps only
    /// the output.
    pub(crate) fn forward_full(&self, batch: &Matrix) -> Result<Vec<Matrix>> {
        self.check_width(batch)?;
        let last = self.weights.len() - 1;
        let mut acts = Vec::with_capacity(self.weights.len() + 1);
        acts.push(batch.clone());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = acts[l].matmul(w)?;
            for i in 0..z.rows() {
                let row = z.row_mut(i);
                for (v, bias) in row.iter_mut().zip(b) {
                    *v += bias;
                }
                if l < last {
                    for v in row.iter_mut() {
                        if *v < 0.0 {
                            *v = 0.0;
                        }
                    }
                }
            }
            if l == last {
                self.apply_head(&mut z);
            }
            acts.push(z);
        }
        Ok(acts)
    }

    /// Reconstructs a batch.
    pub fn forward(&self, batch: &Matrix) -> Result<Matrix> {
        Ok(self.forward_full(batch)?.pop().expect("forward_full returns at least the input"))
    }

    /// The per-sample loss between a target row and its reconstruction;
    /// this is both the training objective and the anomaly score.
    pub(crate) fn per_sample_loss(&self, target: &[f64], output: &[f64]) -> f64 {
        match &self.arch.head {
            OutputHead::Identity => {
                let d = target.len() as f64;
                target.iter().zip(output).map(|(x, y)| (y - x) * (y - x)).sum::<f64>() / d
            }
            OutputHead::Mixed(layout) => {
                let mut loss = 0.0;
                for &(start, width) in &layout.blocks {
                    let mut bce = 0.0;
                    for k in start..start + width {
                        let p = clamp_prob(output[k]);
                        bce -= target[k] * p.ln() + (1.0 - target[k]) * (1.0 - p).ln();
                    }
                    loss += bce / width as f64;
                }
                for &c in &layout.continuous {
                    let d = output[c] - target[c];
                    loss += d * d;
                }
                loss
            }
        }
    }

    /// Gradient of the per-sample loss with respect to the output layer's
    /// pre-activations, written into `delta`.
    pub(crate) fn output_delta(&self, target: &[f64], output: &[f64], delta: &mut [f64]) {
        match &self.arch.head {
            OutputHead::Identity => {
                let scale = 2.0 / target.len() as f64;
                for ((d, y), x) in delta.iter_mut().zip(output).zip(target) {
                    *d = scale * (y - x);
                }
            }
            OutputHead::Mixed(layout) => {
                for &(start, width) in &layout.blocks {
                    // Per-block binary cross-entropy through the softmax:
                    // with t_k = x_k - p_k (1 - x_k) / (1 - p_k), the
                    // pre-activation gradient is -(t_j - p_j sum_k t_k) / K.
                    let mut t = vec![0.0; width];
                    let mut t_sum = 0.0;
                    for (k, tk) in t.iter_mut().enumerate() {
                        let p = clamp_prob(output[start + k]);
                        let x = target[start + k];
                        *tk = x - p * (1.0 - x) / (1.0 - p);
                        t_sum += *tk;
                    }
                    for k in 0..width {
                        let p = output[start + k];
                        delta[start + k] = -(t[k] - p * t_sum) / width as f64;
                    }
                }
                for &c in &layout.continuous {
                    delta[c] = 2.0 * (output[c] - target[c]);
                }
            }
        }
    }
}

/// Per-row anomaly scores: the same per-sample loss used in training,
/// evaluated on each row's reconstruction.
pub fn reconstruction_errors(model: &AeModel, data: &Matrix) -> Result<Vec<f64>> {
    let out = model.forward(data)?;
    Ok((0..data.rows()).map(|i| model.per_sample_loss(data.row(i), out.row(i))).collect())
}

fn write_floats(out: &mut String, values: &[f64]) {
    for (j, v) in values.iter().enumerate() {
        if j > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{}", v);
    }
    out.push('\n');
}

/// Saves a model as a self-describing text file (architecture, head layout,
/// then per-layer parameters).
pub fn save_model(path: impl AsRef<Path>, model: &AeModel) -> Result<()> {
    let mut out = String::new();
    out.push_str("ae-model v1\n");
    out.push_str("layers");
    for s in &model.arch.layer_sizes {
        let _ = write!(out, " {}", s);
    }
    out.push('\n');
    match &model.arch.head {
        OutputHead::Identity => out.push_str("head identity\n"),
        OutputHead::Mixed(layout) => {
            out.push_str("head mixed\n");
            out.push_str("blocks");
            for &(start, width) in &layout.blocks {
                let _ = write!(out, " {}:{}", start, width);
            }
            out.push('\n');
            out.push_str("continuous");
            for &c in &layout.continuous {
                let _ = write!(out, " {}", c);
            }
            out.push('\n');
        }
    }
    let _ = writeln!(out, "init_seed {}", model.init_seed);
    for (l, (w, b)) in model.weights.iter().zip(&model.biases).enumerate() {
        let _ = writeln!(out, "w{} {} {}", l, w.rows(), w.cols());
        for i in 0..w.rows() {
            write_floats(&mut out, w.row(i));
        }
        let _ = writeln!(out, "b{} {}", l, b.len());
        write_floats(&mut out, b);
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Loads a model saved by [`save_model`].
pub fn load_model(path: impl AsRef<Path>) -> Result<AeModel> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let mut next = |what: &str| -> Result<(u64, &str)> {
        lines
            .next()
            .map(|(i, l)| (i as u64 + 1, l))
            .ok_or(Error::Parse { line: 0, msg: format!("missing {}", what) })
    };

    let (no, magic) = next("file header")?;
    if magic.trim() != "ae-model v1" {
        return Err(Error::Parse { line: no, msg: format!("unrecognized model file {:?}", magic) });
    }

    let (no, layers_line) = next("layer sizes")?;
    let layer_sizes: Vec<usize> = layers_line
        .strip_prefix("layers")
        .ok_or(Error::Parse { line: no, msg: "expected `layers ...`".into() })?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Parse { line: no, msg: format!("bad size {:?}", t) }))
        .collect::<Result<_>>()?;

    let (no, head_line) = next("head spec")?;
    let head = match head_line.trim() {
        "head identity" => OutputHead::Identity,
        "head mixed" => {
            let (no, blocks_line) = next("blocks")?;
            let blocks = blocks_line
                .strip_prefix("blocks")
                .ok_or(Error::Parse { line: no, msg: "expected `blocks ...`".into() })?
                .split_whitespace()
                .map(|t| {
                    let (s, w) = t
                        .split_once(':')
                        .ok_or(Error::Parse { line: no, msg: format!("bad block {:?}", t) })?;
                    Ok((
                        s.parse().map_err(|_| Error::Parse {
                            line: no,
                            msg: format!("bad block start {:?}", s),
                        })?,
                        w.parse().map_err(|_| Error::Parse {
                            line: no,
                            msg: format!("bad block width {:?}", w),
                        })?,
                    ))
                })
                .collect::<Result<_>>()?;
            let (no, cont_line) = next("continuous columns")?;
            let continuous = cont_line
                .strip_prefix("continuous")
                .ok_or(Error::Parse { line: no, msg: "expected `continuous ...`".into() })?
                .split_whitespace()
                .map(|t| {
                    t.parse()
                        .map_err(|_| Error::Parse { line: no, msg: format!("bad column {:?}", t) })
                })
                .collect::<Result<_>>()?;
            OutputHead::Mixed(HeadLayout { blocks, continuous })
        }
        other => return Err(Error::Parse { line: no, msg: format!("bad head {:?}", other) }),
    };
    let arch = AeArchitecture::new(layer_sizes, head)?;

    let (no, seed_line) = next("init seed")?;
    let init_seed: u64 = seed_line
        .strip_prefix("init_seed")
        .ok_or(Error::Parse { line: no, msg: "expected `init_seed ...`".into() })?
        .trim()
        .parse()
        .map_err(|_| Error::Parse { line: no, msg: "bad init seed".into() })?;

    let parse_floats = |line_no: u64, line: &str, want: usize| -> Result<Vec<f64>> {
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| Error::Parse { line: line_no, msg: format!("bad float {:?}", t) })
            })
            .collect::<Result<_>>()?;
        if vals.len() != want {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {} values, got {}", want, vals.len()),
            });
        }
        Ok(vals)
    };

    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for l in 0..arch.layer_sizes.len() - 1 {
        let (fan_in, fan_out) = (arch.layer_sizes[l], arch.layer_sizes[l + 1]);
        let (no, wl) = next("weight header")?;
        let expect = format!("w{} {} {}", l, fan_in, fan_out);
        if wl.trim() != expect {
            return Err(Error::Parse { line: no, msg: format!("expected `{}`", expect) });
        }
        let mut data = Vec::with_capacity(fan_in * fan_out);
        for _ in 0..fan_in {
            let (no, row) = next("weight row")?;
            data.extend(parse_floats(no, row, fan_out)?);
        }
        weights.push(Matrix::from_vec(fan_in, fan_out, data)?);

        let (no, bl) = next("bias header")?;
        let expect = format!("b{} {}", l, fan_out);
        if bl.trim() != expect {
            return Err(Error::Parse { line: no, msg: format!("expected `{}`", expect) });
        }
        let (no, brow) = next("bias row")?;
        biases.push(parse_floats(no, brow, fan_out)?);
    }

    let model = AeModel { arch, weights, biases, init_seed };
    if model.weights.iter().any(|w| w.data().iter().any(|v| !v.is_finite()))
        || model.biases.iter().any(|b| b.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::Validation("model file holds non-finite parameters".into()));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mixed_head_3_3_1() -> OutputHead {
        OutputHead::Mixed(HeadLayout { blocks: vec![(0, 3), (3, 3)], continuous: vec![6] })
    }

    #[test]
    fn architecture_validation() {
        assert!(AeArchitecture::small(7, OutputHead::Identity).is_ok());
        assert!(AeArchitecture::new(vec![5, 3, 4], OutputHead::Identity).is_err());
        assert!(AeArchitecture::new(vec![5, 3, 0, 3, 5], OutputHead::Identity).is_err());
        // Mixed layout must tile the output width exactly.
        assert!(AeArchitecture::small(7, mixed_head_3_3_1()).is_ok());
        assert!(AeArchitecture::small(8, mixed_head_3_3_1()).is_err());
    }

    #[test]
    fn init_shapes_bounds_and_determinism() {
        let arch = AeArchitecture::small(7, OutputHead::Identity).unwrap();
        let model = init_model(&arch, 11).unwrap();
        let shapes: Vec<(usize, usize)> =
            model.weights.iter().map(|w| (w.rows(), w.cols())).collect();
        assert_eq!(shapes, vec![(7, 6), (6, 4), (4, 2), (2, 4), (4, 6), (6, 7)]);
        for w in &model.weights {
            let limit = (6.0 / (w.rows() + w.cols()) as f64).sqrt();
            assert!(w.data().iter().all(|v| v.abs() <= limit));
        }
        assert!(model.biases.iter().all(|b| b.iter().all(|&v| v == 0.0)));

        let again = init_model(&arch, 11).unwrap();
        for (a, b) in model.weights.iter().zip(&again.weights) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn zero_weight_identity_model_outputs_bias() {
        let arch = AeArchitecture::new(vec![3, 2, 3], OutputHead::Identity).unwrap();
        let mut model = init_model(&arch, 0).unwrap();
        for w in &mut model.weights {
            w.data_mut().fill(0.0);
        }
        model.biases[1] = vec![0.5, -1.5, 2.0];
        let batch = Matrix::from_fn(4, 3, |i, j| (i + j) as f64);
        let out = model.forward(&batch).unwrap();
        for i in 0..4 {
            assert_eq!(out.row(i), &[0.5, -1.5, 2.0]);
        }
    }

    #[test]
    fn mixed_head_blocks_are_simplices() {
        let arch = AeArchitecture::small(7, mixed_head_3_3_1()).unwrap();
        let model = init_model(&arch, 5).unwrap();
        let batch = Matrix::from_fn(6, 7, |i, j| ((i * 7 + j) % 3) as f64 / 2.0);
        let out = model.forward(&batch).unwrap();
        for i in 0..6 {
            let row = out.row(i);
            for block in [&row[0..3], &row[3..6]] {
                let sum: f64 = block.iter().sum();
                assert!((sum - 1.0).abs() < 1e-9, "block sums to {}", sum);
                assert!(block.iter().all(|&p| p > 0.0));
            }
        }
    }

    #[test]
    fn scores_are_permutation_equivariant() {
        let arch = AeArchitecture::small(7, OutputHead::Identity).unwrap();
        let model = init_model(&arch, 9).unwrap();
        let batch = Matrix::from_fn(5, 7, |i, j| ((i * 3 + j * 5) % 11) as f64 / 10.0);
        let scores = reconstruction_errors(&model, &batch).unwrap();
        let perm = [3, 1, 4, 0, 2];
        let permuted = Matrix::from_fn(5, 7, |i, j| batch.get(perm[i], j));
        let permuted_scores = reconstruction_errors(&model, &permuted).unwrap();
        for (i, &p) in perm.iter().enumerate() {
            assert_eq!(scores[p], permuted_scores[i]);
        }
    }

    #[test]
    fn rejects_width_mismatch() {
        let arch = AeArchitecture::small(7, OutputHead::Identity).unwrap();
        let model = init_model(&arch, 1).unwrap();
        let batch = Matrix::zeros(2, 6);
        assert!(matches!(model.forward(&batch), Err(Error::Dimension(_))));
    }

    #[test]
    fn save_load_round_trips_bitwise() {
        let dir = tempfile::tempdir().unwrap();

        for head in [OutputHead::Identity, mixed_head_3_3_1()] {
            let path = dir.path().join("model.ae");
            let arch = AeArchitecture::small(7, head).unwrap();
            let model = init_model(&arch, 1234).unwrap();
            save_model(&path, &model).unwrap();
            let loaded = load_model(&path).unwrap();
            assert_eq!(loaded.arch, model.arch);
            assert_eq!(loaded.init_seed, model.init_seed);
            for (a, b) in model.weights.iter().zip(&loaded.weights) {
                assert_eq!(a, b);
            }
            for (a, b) in model.biases.iter().zip(&loaded.biases) {
                assert_eq!(a, b);
            }
        }
    }
}
