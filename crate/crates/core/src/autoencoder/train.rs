//! Minibatch training with Adam and an optional proximal pull.
//!
//! The [`Trainer`] owns the model together with its optimizer state and a
//! cumulative epoch counter, so training can be paused, its parameters
//! swapped (as a federation round does), and resumed — and a training split
//! into rounds walks the exact same shuffle and moment sequence as one
//! uninterrupted run.

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::seeding;

use super::AeModel;

/// Hyperparameters of one training run.
#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub shuffle_seed: u64,
    /// Proximal strength; 0 trains plainly, > 0 pulls parameters toward the
    /// reference (the entry parameters for one-shot training).
    pub mu: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            shuffle_seed: 0,
            mu: 0.0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::InvalidArgument("betas must lie in [0, 1)".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument("epsilon must be positive".into()));
        }
        if !(self.mu >= 0.0) {
            return Err(Error::InvalidArgument("proximal strength must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Snapshot the proximal term pulls toward.
struct ProxReference {
    mu: f64,
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
}

/// Batch-mean loss plus its gradients with respect to every parameter.
///
/// Exposed so gradient checks can compare against finite differences; the
/// proximal term is an optimizer-level addition and not included here.
pub fn loss_and_gradients(
    model: &AeModel,
    batch: &Matrix,
) -> Result<(f64, Vec<Matrix>, Vec<Vec<f64>>)> {
    let n = batch.rows();
    if n == 0 {
        return Err(Error::InvalidArgument("cannot evaluate an empty batch".into()));
    }
    let acts = model.forward_full(batch)?;
    let out = acts.last().expect("activations include the output");

    let mut loss = 0.0;
    for i in 0..n {
        loss += model.per_sample_loss(batch.row(i), out.row(i));
    }
    loss /= n as f64;

    // Pre-activation gradient at the output, averaged over the batch.
    let layers = model.weights.len();
    let mut delta = Matrix::zeros(n, out.cols());
    for i in 0..n {
        model.output_delta(batch.row(i), out.row(i), delta.row_mut(i));
        for v in delta.row_mut(i) {
            *v /= n as f64;
        }
    }

    let mut grad_w = vec![Matrix::zeros(0, 0); layers];
    let mut grad_b = vec![Vec::new(); layers];
    for l in (0..layers).rev() {
        grad_w[l] = acts[l].transpose().matmul(&delta)?;
        grad_b[l] = (0..delta.cols()).map(|j| delta.col(j).iter().sum()).collect();
        if l > 0 {
            // Back through the weights, gated by ReLU (active where the
            // hidden activation is positive).
            let mut prev = delta.matmul(&model.weights[l].transpose())?;
            for i in 0..n {
                let gate = acts[l].row(i);
                for (v, &a) in prev.row_mut(i).iter_mut().zip(gate) {
                    if a <= 0.0 {
                        *v = 0.0;
                    }
                }
            }
            delta = prev;
        }
    }
    Ok((loss, grad_w, grad_b))
}

/// A model mid-training: parameters plus Adam moments and the cumulative
/// epoch counter.
pub struct Trainer {
    model: AeModel,
    cfg: TrainConfig,
    m_w: Vec<Matrix>,
    v_w: Vec<Matrix>,
    m_b: Vec<Vec<f64>>,
    v_b: Vec<Vec<f64>>,
    beta1_pow: f64,
    beta2_pow: f64,
    epoch: u64,
    prox: Option<ProxReference>,
}

impl Trainer {
    pub fn new(model: AeModel, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let m_w = model.weights.iter().map(|w| Matrix::zeros(w.rows(), w.cols())).collect();
        let v_w = model.weights.iter().map(|w| Matrix::zeros(w.rows(), w.cols())).collect();
        let m_b = model.biases.iter().map(|b| vec![0.0; b.len()]).collect();
        let v_b = model.biases.iter().map(|b| vec![0.0; b.len()]).collect();
        Ok(Trainer {
            model,
            cfg,
            m_w,
            v_w,
            m_b,
            v_b,
            beta1_pow: 1.0,
            beta2_pow: 1.0,
            epoch: 0,
            prox: None,
        })
    }

    pub fn model(&self) -> &AeModel {
        &self.model
    }

    pub fn into_model(self) -> AeModel {
        self.model
    }

    /// Cumulative epochs trained so far.
    pub fn epochs_done(&self) -> u64 {
        self.epoch
    }

    /// Replaces the model's parameters (e.g. with freshly aggregated ones)
    /// while keeping optimizer state and the epoch counter.
    pub fn load_params(&mut self, source: &AeModel) -> Result<()> {
        if source.arch != self.model.arch {
            return Err(Error::Validation("parameter source has a different architecture".into()));
        }
        self.model.weights.clone_from(&source.weights);
        self.model.biases.clone_from(&source.biases);
        Ok(())
    }

    /// Sets the proximal pull toward `reference`. Zero strength clears it
    /// and trains plainly.
    pub fn set_prox(&mut self, mu: f64, reference: &AeModel) -> Result<()> {
        if !(mu >= 0.0) {
            return Err(Error::InvalidArgument("proximal strength must be nonnegative".into()));
        }
        if reference.arch != self.model.arch {
            return Err(Error::Validation("proximal reference has a different architecture".into()));
        }
        self.prox = (mu > 0.0).then(|| ProxReference {
            mu,
            weights: reference.weights.clone(),
            biases: reference.biases.clone(),
        });
        Ok(())
    }

    pub fn clear_prox(&mut self) {
        self.prox = None;
    }

    /// Trains for `epochs` more epochs, returning the mean per-sample loss
    /// of each (measured on the pre-update forward pass of every batch).
    pub fn run_epochs(&mut self, data: &Matrix, epochs: usize) -> Result<Vec<f64>> {
        let n = data.rows();
        if n == 0 {
            return Err(Error::InvalidArgument("cannot train on an empty dataset".into()));
        }
        if data.cols() != self.model.arch.input_dim() {
            return Err(Error::Dimension(format!(
                "data has {} columns but the model expects {}",
                data.cols(),
                self.model.arch.input_dim()
            )));
        }

        let mut history = Vec::with_capacity(epochs);
        for _ in 0..epochs {
            // The permutation stream is keyed on the cumulative epoch, so a
            // training split into rounds shuffles exactly like one
            // continuous run.
            let mut rng = seeding::stream(self.cfg.shuffle_seed, &[self.epoch]);
            let mut perm: Vec<usize> = (0..n).collect();
            for i in 0..n.saturating_sub(1) {
                let j = rng.gen_range(i..n);
                perm.swap(i, j);
            }

            let mut epoch_loss = 0.0;
            for (batch_idx, chunk) in perm.chunks(self.cfg.batch_size).enumerate() {
                let batch = data.select_rows(chunk);
                let (loss, grad_w, grad_b) = loss_and_gradients(&self.model, &batch)?;
                if !loss.is_finite() {
                    return Err(Error::Divergence {
                        epoch: self.epoch as usize,
                        batch: batch_idx,
                    });
                }
                epoch_loss += loss * chunk.len() as f64;
                self.step(grad_w, grad_b);
            }
            history.push(epoch_loss / n as f64);
            self.epoch += 1;
        }
        Ok(history)
    }

    /// One Adam update from the given gradients (plus the proximal pull if
    /// one is set).
    fn step(&mut self, grad_w: Vec<Matrix>, grad_b: Vec<Vec<f64>>) {
        let TrainConfig { learning_rate: lr, beta1, beta2, epsilon, .. } = self.cfg;
        self.beta1_pow *= beta1;
        self.beta2_pow *= beta2;
        let m_corr = 1.0 - self.beta1_pow;
        let v_corr = 1.0 - self.beta2_pow;

        let update = |param: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / m_corr;
            let v_hat = *v / v_corr;
            *param -= lr * m_hat / (v_hat.sqrt() + epsilon);
        };

        for l in 0..self.model.weights.len() {
            for idx in 0..grad_w[l].data().len() {
                let mut g = grad_w[l].data()[idx];
                if let Some(prox) = &self.prox {
                    g += prox.mu * (self.model.weights[l].data()[idx] - prox.weights[l].data()[idx]);
                }
                update(
                    &mut self.model.weights[l].data_mut()[idx],
                    g,
                    &mut self.m_w[l].data_mut()[idx],
                    &mut self.v_w[l].data_mut()[idx],
                );
            }
            for idx in 0..grad_b[l].len() {
                let mut g = grad_b[l][idx];
                if let Some(prox) = &self.prox {
                    g += prox.mu * (self.model.biases[l][idx] - prox.biases[l][idx]);
                }
                update(
                    &mut self.model.biases[l][idx],
                    g,
                    &mut self.m_b[l][idx],
                    &mut self.v_b[l][idx],
                );
            }
        }
    }
}

/// One-shot training: runs `cfg.epochs` epochs and returns the trained
/// model with its loss history. With `cfg.mu > 0` the proximal term pulls
/// toward the parameters the model entered with.
pub fn train(model: AeModel, data: &Matrix, cfg: &TrainConfig) -> Result<(AeModel, Vec<f64>)> {
    let reference = (cfg.mu > 0.0).then(|| model.clone());
    let mut trainer = Trainer::new(model, cfg.clone())?;
    if let Some(reference) = reference {
        trainer.set_prox(cfg.mu, &reference)?;
    }
    let history = trainer.run_epochs(data, cfg.epochs)?;
    Ok((trainer.into_model(), history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoencoder::{init_model, reconstruction_errors, AeArchitecture, OutputHead};

    fn constant_rows(n: usize, row: &[f64]) -> Matrix {
        Matrix::from_fn(n, row.len(), |_, j| row[j])
    }

    #[test]
    fn converges_on_degenerate_data() {
        let arch = AeArchitecture::new(vec![4, 3, 2, 3, 4], OutputHead::Identity).unwrap();
        let model = init_model(&arch, 7).unwrap();
        let data = constant_rows(50, &[0.3, 0.8, 0.1, 0.6]);
        let initial = reconstruction_errors(&model, &data).unwrap()[0];
        // Tiny dataset, so per-sample steps: 200 epochs of batch size 1
        // give the optimizer room to actually travel.
        let cfg =
            TrainConfig { epochs: 200, batch_size: 1, shuffle_seed: 5, ..TrainConfig::default() };
        let (trained, history) = train(model, &data, &cfg).unwrap();
        let last = reconstruction_errors(&trained, &data).unwrap()[0];
        assert!(
            last < 1e-3 * initial,
            "initial {} final {} (history tail {:?})",
            initial,
            last,
            &history[history.len() - 3..]
        );
    }

    #[test]
    fn zero_mu_matches_plain_training_bitwise() {
        let arch = AeArchitecture::new(vec![3, 2, 3], OutputHead::Identity).unwrap();
        let data = Matrix::from_fn(20, 3, |i, j| ((i * 3 + j) % 7) as f64 / 7.0);
        let cfg = TrainConfig { epochs: 5, shuffle_seed: 3, ..TrainConfig::default() };

        let (plain, _) = train(init_model(&arch, 1).unwrap(), &data, &cfg).unwrap();

        // Same run, but with a zero-strength proximal pull toward a
        // completely different reference: must be ignored entirely.
        let mut trainer = Trainer::new(init_model(&arch, 1).unwrap(), cfg).unwrap();
        let reference = init_model(&arch, 999).unwrap();
        trainer.set_prox(0.0, &reference).unwrap();
        trainer.run_epochs(&data, 5).unwrap();

        for (a, b) in plain.weights.iter().zip(&trainer.model().weights) {
            assert_eq!(a, b);
        }
        for (a, b) in plain.biases.iter().zip(&trainer.model().biases) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn positive_mu_changes_the_trajectory() {
        let arch = AeArchitecture::new(vec![3, 2, 3], OutputHead::Identity).unwrap();
        let data = Matrix::from_fn(20, 3, |i, j| ((i * 5 + j) % 9) as f64 / 9.0);
        let plain_cfg = TrainConfig { epochs: 3, shuffle_seed: 2, ..TrainConfig::default() };
        let prox_cfg = TrainConfig { mu: 0.5, ..plain_cfg.clone() };
        let (plain, _) = train(init_model(&arch, 4).unwrap(), &data, &plain_cfg).unwrap();
        let (pulled, _) = train(init_model(&arch, 4).unwrap(), &data, &prox_cfg).unwrap();
        let diff: f64 = plain
            .weights
            .iter()
            .zip(&pulled.weights)
            .map(|(a, b)| a.sub(b).unwrap().frob_norm())
            .sum();
        assert!(diff > 1e-9, "proximal pull had no effect");
    }

    #[test]
    fn full_batch_loss_is_nonincreasing_at_small_lr() {
        let arch = AeArchitecture::new(vec![4, 3, 2, 3, 4], OutputHead::Identity).unwrap();
        let model = init_model(&arch, 13).unwrap();
        let data = Matrix::from_fn(24, 4, |i, j| ((i * 7 + j * 3) % 10) as f64 / 10.0);
        let cfg = TrainConfig {
            epochs: 150,
            batch_size: 24,
            learning_rate: 1e-4,
            shuffle_seed: 1,
            ..TrainConfig::default()
        };
        let (_, history) = train(model, &data, &cfg).unwrap();
        for w in history.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "loss rose from {} to {}", w[0], w[1]);
        }
    }

    #[test]
    fn divergence_reports_epoch_and_batch() {
        let arch = AeArchitecture::new(vec![3, 2, 3], OutputHead::Identity).unwrap();
        let mut model = init_model(&arch, 1).unwrap();
        for w in &mut model.weights {
            w.data_mut().fill(1e200);
        }
        let data = Matrix::from_fn(8, 3, |_, _| 1.0);
        let cfg = TrainConfig { epochs: 1, shuffle_seed: 0, ..TrainConfig::default() };
        match train(model, &data, &cfg) {
            Err(Error::Divergence { epoch: 0, batch: 0 }) => {}
            other => panic!("expected divergence, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn training_is_deterministic() {
        let arch = AeArchitecture::new(vec![4, 2, 4], OutputHead::Identity).unwrap();
        let data = Matrix::from_fn(40, 4, |i, j| ((i * 11 + j * 5) % 13) as f64 / 13.0);
        let cfg = TrainConfig { epochs: 4, shuffle_seed: 9, ..TrainConfig::default() };
        let (a, ha) = train(init_model(&arch, 2).unwrap(), &data, &cfg).unwrap();
        let (b, hb) = train(init_model(&arch, 2).unwrap(), &data, &cfg).unwrap();
        assert_eq!(ha, hb);
        for (x, y) in a.weights.iter().zip(&b.weights) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn split_training_resumes_exactly() {
        // Ten epochs in one go vs 5 + 5 through the same trainer: the
        // cumulative epoch counter must make them identical.
        let arch = AeArchitecture::new(vec![4, 3, 4], OutputHead::Identity).unwrap();
        let data = Matrix::from_fn(33, 4, |i, j| ((i * 3 + j * 7) % 17) as f64 / 17.0);
        let cfg = TrainConfig { epochs: 10, shuffle_seed: 21, ..TrainConfig::default() };

        let (oneshot, _) = train(init_model(&arch, 3).unwrap(), &data, &cfg).unwrap();

        let mut trainer = Trainer::new(init_model(&arch, 3).unwrap(), cfg).unwrap();
        trainer.run_epochs(&data, 5).unwrap();
        trainer.run_epochs(&data, 5).unwrap();

        for (a, b) in oneshot.weights.iter().zip(&trainer.model().weights) {
            assert_eq!(a, b);
        }
    }
}
