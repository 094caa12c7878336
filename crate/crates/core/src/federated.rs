//! The five training regimes over a common set of per-organization splits.
//!
//! Individual analysis (IA) trains on one organization's data; centralized
//! analysis (CA) pools every organization's raw rows; FedAvg and FedProx
//! train locally and exchange parameters every round (FedProx adding a
//! proximal pull toward the round-start parameters); the collaboration
//! pipeline (DC) shares only reduced representations and trains a single
//! detector in the aligned space. Every run returns a scorer for encoded
//! test rows plus a ledger of organization/analyst transfers, so the
//! regimes' communication footprints can be compared like for like.

use crate::autoencoder::{
    init_model, reconstruction_errors, train, AeArchitecture, AeModel, OutputHead, TrainConfig,
    Trainer,
};
use crate::dataset::LabeledDataset;
use crate::dc::{
    fit_collaboration, gen_anchor, make_intermediate, to_collab, transform_test, CollabTransform,
    CommLedger,
};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, PcaModel};
use crate::seeding;

/// Seed-stream tags, fixed so every regime draws its initialization and
/// shuffles identically and the equivalence laws (1-client federation vs
/// solo training, pooling one organization vs that organization alone) hold
/// exactly.
const TAG_INIT: u64 = 1;
const TAG_SHUFFLE: u64 = 2;
const TAG_ANCHOR: u64 = 3;

/// Federation schedule.
#[derive(Clone, Copy, Debug)]
pub struct FedConfig {
    pub rounds: usize,
    pub local_epochs: usize,
    /// Proximal strength; only FedProx reads it.
    pub mu: f64,
}

impl Default for FedConfig {
    fn default() -> Self {
        FedConfig { rounds: 10, local_epochs: 20, mu: 0.1 }
    }
}

/// Anchor and reduction settings for the collaboration pipeline.
#[derive(Clone, Copy, Debug)]
pub struct AnchorConfig {
    /// Anchor rows r.
    pub rows: usize,
    /// Per-organization reduced dimensionality; defaults to one below the
    /// encoded feature dimension.
    pub target_dim: Option<usize>,
    /// Collaboration-space dimensionality; defaults to the smallest
    /// per-organization reduced dimensionality.
    pub collab_dim: Option<usize>,
}

impl Default for AnchorConfig {
    fn default() -> Self {
        AnchorConfig { rows: 1000, target_dim: None, collab_dim: None }
    }
}

/// Which hidden stack to build around an input width.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArchKind {
    /// `[io, 6, 4, 2, 4, 6, io]`
    Small,
    /// `[io, 128, 64, 32, 16, 8, 4, 8, 16, 32, 64, 128, io]`
    Deep,
}

impl ArchKind {
    pub fn build(self, io: usize, head: OutputHead) -> Result<AeArchitecture> {
        match self {
            ArchKind::Small => AeArchitecture::small(io, head),
            ArchKind::Deep => AeArchitecture::deep(io, head),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "small" => Some(ArchKind::Small),
            "deep" => Some(ArchKind::Deep),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ArchKind::Small => "small",
            ArchKind::Deep => "deep",
        }
    }
}

/// Training regime.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Ia,
    Ca,
    FedAvg,
    FedProx,
    Dc,
}

impl Method {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ia" => Some(Method::Ia),
            "ca" => Some(Method::Ca),
            "fedavg" => Some(Method::FedAvg),
            "fedprox" => Some(Method::FedProx),
            "dc" => Some(Method::Dc),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ia => "ia",
            Method::Ca => "ca",
            Method::FedAvg => "fedavg",
            Method::FedProx => "fedprox",
            Method::Dc => "dc",
        }
    }
}

/// A trained detector, packaged with whatever view of the data it scores.
pub enum Scorer {
    /// Scores encoded rows directly (IA/CA/FedAvg/FedProx).
    Raw(AeModel),
    /// Scores encoded rows after one organization's private reduction and
    /// its alignment map (DC deployment view).
    Collab { model: AeModel, pca: PcaModel, transform: CollabTransform, org_id: usize },
}

impl Scorer {
    /// Per-row anomaly scores for encoded rows.
    pub fn score(&self, encoded: &Matrix) -> Result<Vec<f64>> {
        match self {
            Scorer::Raw(model) => reconstruction_errors(model, encoded),
            Scorer::Collab { model, pca, transform, org_id } => {
                let collab = transform_test(encoded, pca, transform, *org_id)?;
                reconstruction_errors(model, &collab)
            }
        }
    }

    pub fn model(&self) -> &AeModel {
        match self {
            Scorer::Raw(model) => model,
            Scorer::Collab { model, .. } => model,
        }
    }
}

/// One completed training run.
pub struct MethodRun {
    pub method: Method,
    /// Participating organization positions (0-based within the split list).
    pub orgs: Vec<usize>,
    pub seed: u64,
    pub scorer: Scorer,
    pub ledger: CommLedger,
}

fn validate_splits(splits: &[LabeledDataset]) -> Result<()> {
    if splits.is_empty() {
        return Err(Error::InvalidArgument("need at least one organization split".into()));
    }
    let dim = splits[0].features.cols();
    for (k, s) in splits.iter().enumerate() {
        if s.is_empty() {
            return Err(Error::InvalidArgument(format!("organization {} has no rows", k)));
        }
        if s.features.cols() != dim {
            return Err(Error::Dimension(format!(
                "organization {} is encoded with {} columns, expected {}",
                k,
                s.features.cols(),
                dim
            )));
        }
    }
    Ok(())
}

fn base_train_cfg(train_cfg: &TrainConfig, seed: u64, client_pos: usize) -> TrainConfig {
    TrainConfig {
        shuffle_seed: seeding::derive(seed, &[TAG_SHUFFLE, client_pos as u64]),
        mu: 0.0,
        ..train_cfg.clone()
    }
}

/// Trains on a single organization's data.
pub fn run_ia(
    split: &LabeledDataset,
    arch: &AeArchitecture,
    train_cfg: &TrainConfig,
    seed: u64,
) -> Result<MethodRun> {
    validate_splits(std::slice::from_ref(split))?;
    let model = init_model(arch, seeding::derive(seed, &[TAG_INIT]))?;
    let cfg = base_train_cfg(train_cfg, seed, 0);
    let (trained, _history) = train(model, &split.features, &cfg)?;
    Ok(MethodRun {
        method: Method::Ia,
        orgs: vec![0],
        seed,
        scorer: Scorer::Raw(trained),
        ledger: CommLedger::new(1),
    })
}

/// Pools every organization's raw rows and trains centrally.
pub fn run_ca(
    splits: &[LabeledDataset],
    arch: &AeArchitecture,
    train_cfg: &TrainConfig,
    seed: u64,
) -> Result<MethodRun> {
    validate_splits(splits)?;
    let blocks: Vec<&Matrix> = splits.iter().map(|s| &s.features).collect();
    let pooled = Matrix::vcat(&blocks)?;
    let model = init_model(arch, seeding::derive(seed, &[TAG_INIT]))?;
    let cfg = base_train_cfg(train_cfg, seed, 0);
    let (trained, _history) = train(model, &pooled, &cfg)?;
    // Centralization moves every organization's raw data across the
    // boundary once.
    let mut ledger = CommLedger::new(splits.len());
    for k in 0..splits.len() {
        ledger.record_upload(k)?;
    }
    Ok(MethodRun {
        method: Method::Ca,
        orgs: (0..splits.len()).collect(),
        seed,
        scorer: Scorer::Raw(trained),
        ledger,
    })
}

fn run_param_averaging(
    method: Method,
    splits: &[LabeledDataset],
    arch: &AeArchitecture,
    fed: &FedConfig,
    train_cfg: &TrainConfig,
    seed: u64,
    mu: f64,
) -> Result<MethodRun> {
    validate_splits(splits)?;
    if fed.rounds == 0 {
        return Err(Error::InvalidArgument("need at least one aggregation round".into()));
    }
    if fed.local_epochs == 0 {
        return Err(Error::InvalidArgument("need at least one local epoch per round".into()));
    }

    let k = splits.len();
    let weights: Vec<usize> = splits.iter().map(|s| s.len()).collect();
    let mut global = init_model(arch, seeding::derive(seed, &[TAG_INIT]))?;
    let mut ledger = CommLedger::new(k);

    // Clients keep their trainers across rounds: optimizer moments and the
    // cumulative epoch counter carry over, so a 1-client federation walks
    // the exact trajectory of an uninterrupted solo run.
    let mut clients: Vec<Trainer> = (0..k)
        .map(|pos| Trainer::new(global.clone(), base_train_cfg(train_cfg, seed, pos)))
        .collect::<Result<_>>()?;

    for round in 0..fed.rounds {
        for (pos, trainer) in clients.iter_mut().enumerate() {
            trainer.load_params(&global)?;
            ledger.record_download(pos)?;
            if mu > 0.0 {
                trainer.set_prox(mu, &global)?;
            }
            trainer.run_epochs(&splits[pos].features, fed.local_epochs).map_err(|e| match e {
                Error::Divergence { .. } => {
                    Error::ClientDiverged { round, client: pos, source: Box::new(e) }
                }
                other => other,
            })?;
            ledger.record_upload(pos)?;
        }
        let models: Vec<&AeModel> = clients.iter().map(|t| t.model()).collect();
        global = aggregate_fedavg(&models, &weights)?;
    }

    Ok(MethodRun {
        method,
        orgs: (0..k).collect(),
        seed,
        scorer: Scorer::Raw(global),
        ledger,
    })
}

/// Parameter-averaging federation.
pub fn run_fedavg(
    splits: &[LabeledDataset],
    arch: &AeArchitecture,
    fed: &FedConfig,
    train_cfg: &TrainConfig,
    seed: u64,
) -> Result<MethodRun> {
    run_param_averaging(Method::FedAvg, splits, arch, fed, train_cfg, seed, 0.0)
}

/// Parameter-averaging federation with a proximal pull toward the
/// round-start parameters.
pub fn run_fedprox(
    splits: &[LabeledDataset],
    arch: &AeArchitecture,
    fed: &FedConfig,
    train_cfg: &TrainConfig,
    seed: u64,
) -> Result<MethodRun> {
    run_param_averaging(Method::FedProx, splits, arch, fed, train_cfg, seed, fed.mu)
}

/// Weighted parameter mean: every parameter becomes `sum_k (n_k/n) w_k`.
///
/// Computed anchored on the first model (`w_0 + sum_k (n_k/n)(w_k - w_0)`),
/// so aggregating identical models returns them bit for bit and a single
/// client's model passes through unchanged.
pub fn aggregate_fedavg(models: &[&AeModel], weights: &[usize]) -> Result<AeModel> {
    if models.is_empty() {
        return Err(Error::InvalidArgument("nothing to aggregate".into()));
    }
    if models.len() != weights.len() {
        return Err(Error::Dimension(format!(
            "{} models but {} weights",
            models.len(),
            weights.len()
        )));
    }
    for m in &models[1..] {
        if m.arch != models[0].arch {
            return Err(Error::Validation(
                "cannot aggregate models with different architectures".into(),
            ));
        }
    }
    let total: usize = weights.iter().sum();
    if total == 0 {
        return Err(Error::InvalidArgument("aggregation weights sum to zero".into()));
    }
    if models.len() == 1 {
        return Ok(models[0].clone());
    }

    let mut out = models[0].clone();
    let fractions: Vec<f64> = weights.iter().map(|&w| w as f64 / total as f64).collect();
    for l in 0..out.weights.len() {
        for idx in 0..out.weights[l].data().len() {
            let w0 = models[0].weights[l].data()[idx];
            let sum: f64 = models
                .iter()
                .zip(&fractions)
                .map(|(m, &f)| f * (m.weights[l].data()[idx] - w0))
                .sum();
            if sum != 0.0 {
                out.weights[l].data_mut()[idx] = w0 + sum;
            }
        }
        for idx in 0..out.biases[l].len() {
            let b0 = models[0].biases[l][idx];
            let sum: f64 = models
                .iter()
                .zip(&fractions)
                .map(|(m, &f)| f * (m.biases[l][idx] - b0))
                .sum();
            if sum != 0.0 {
                out.biases[l][idx] = b0 + sum;
            }
        }
    }
    Ok(out)
}

/// The collaboration pipeline: shared anchor, per-organization reductions,
/// alignment, and one identity-head detector in the aligned space.
pub fn run_dc(
    splits: &[LabeledDataset],
    anchor_cfg: &AnchorConfig,
    arch: ArchKind,
    train_cfg: &TrainConfig,
    seed: u64,
) -> Result<MethodRun> {
    validate_splits(splits)?;
    let k = splits.len();
    let m = splits[0].features.cols();
    let target_dim = anchor_cfg.target_dim.unwrap_or(m.saturating_sub(1));
    let anchor = gen_anchor(m, anchor_cfg.rows, seeding::derive(seed, &[TAG_ANCHOR]))?;
    let mut ledger = CommLedger::new(k);

    let mut reps = Vec::with_capacity(k);
    let mut private_models = Vec::with_capacity(k);
    for (pos, split) in splits.iter().enumerate() {
        let (rep, pca) = make_intermediate(pos, &split.features, &anchor, target_dim)?;
        // One upload: the reduced data and reduced anchor travel together.
        ledger.record_upload(pos)?;
        reps.push(rep);
        private_models.push(pca);
    }

    let transform = fit_collaboration(&reps, anchor_cfg.collab_dim)?;
    let blocks: Vec<Matrix> =
        reps.iter().map(|rep| to_collab(&transform, rep)).collect::<Result<_>>()?;
    let refs: Vec<&Matrix> = blocks.iter().collect();
    let stacked = Matrix::vcat(&refs)?;

    let ae_arch = arch.build(transform.m_hat, OutputHead::Identity)?;
    let model = init_model(&ae_arch, seeding::derive(seed, &[TAG_INIT]))?;
    let cfg = base_train_cfg(train_cfg, seed, 0);
    let (trained, _history) = train(model, &stacked, &cfg)?;

    // One download: each organization receives its alignment map and the
    // trained detector together.
    for pos in 0..k {
        ledger.record_download(pos)?;
    }

    Ok(MethodRun {
        method: Method::Dc,
        orgs: (0..k).collect(),
        seed,
        scorer: Scorer::Collab {
            model: trained,
            pca: private_models.swap_remove(0),
            transform,
            org_id: 0,
        },
        ledger,
    })
}
