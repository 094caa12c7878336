//! The experiment driver: data preparation, the full method × participants
//! × ratio × repetition grid, and deterministic result collection.
//!
//! One configuration fixes the data: training rows and their partition are
//! generated from the base seed alone, and each test set depends only on
//! the base seed and its anomaly ratio. Repetitions then differ purely in
//! model initialization and shuffling, so a method's spread across reps
//! measures initialization sensitivity, not data luck. Every grid cell is
//! independent and may run on a worker pool; rows are sorted afterwards so
//! the output is identical regardless of scheduling.

mod config;
mod report;

pub use config::{DatasetKind, ExperimentConfig};
pub use report::{
    aggregated_csv, failures_jsonl, parse_results_csv, report_text, results_csv, write_reports,
};

use std::time::Instant;

use rayon::prelude::*;

use crate::autoencoder::{HeadLayout, OutputHead, TrainConfig};
use crate::dataset::{
    encode_entries, fit_schema, gen_journal_corpus, gen_synthetic_normal,
    inject_journal_anomalies_with, inject_synthetic_anomalies, load_journal_csv,
    load_labeled_journal_csv, AnomalySpec, JournalAnomalyPlan, JournalConfig, JournalEntry,
    JournalGenerator, Label, LabeledDataset, Schema,
};
use crate::error::{Error, Result};
use crate::eval::{ap_triple_with, ApTriple, ScoredSet};
use crate::federated::{
    run_ca, run_dc, run_fedavg, run_fedprox, run_ia, AnchorConfig, FedConfig, Method,
};
use crate::partition::{PartitionMode, PartitionPlan};
use crate::seeding;

const TAG_DATA: u64 = 0x10;
const TAG_SPLIT: u64 = 0x11;
const TAG_TEST: u64 = 0x12;
const TAG_INJECT: u64 = 0x13;
const TAG_CELL: u64 = 0x14;

/// Immutable data shared by every grid cell.
pub struct PreparedData {
    pub schema: Schema,
    /// Per-organization training splits, in participation order.
    pub splits: Vec<LabeledDataset>,
    /// One labeled test set per anomaly ratio, `(ratio, data)`.
    pub tests: Vec<(f64, LabeledDataset)>,
}

/// One successful grid cell.
#[derive(Clone, Debug)]
pub struct ExperimentRow {
    pub method: Method,
    pub setting: PartitionMode,
    pub lambda: usize,
    pub ratio: f64,
    pub rep: usize,
    pub triple: ApTriple,
    /// Organization-to-analyst transfer total; absent on rows re-read from
    /// a results CSV, which does not carry the ledger.
    pub uploads: Option<u64>,
    /// Analyst-to-organization transfer total; absent on re-read rows.
    pub downloads: Option<u64>,
    pub train_ms: u64,
    pub score_ms: u64,
}

/// One failed grid cell; the rest of the grid still ran.
#[derive(Clone, Debug)]
pub struct CellFailure {
    pub method: Method,
    pub setting: PartitionMode,
    pub lambda: usize,
    pub ratio: f64,
    pub rep: usize,
    pub message: String,
}

/// Everything a finished experiment produced.
pub struct RunResult {
    /// Canonical configuration the run was produced from.
    pub fingerprint: String,
    pub rows: Vec<ExperimentRow>,
    pub failures: Vec<CellFailure>,
    /// Data generation/partition time.
    pub prep_ms: u64,
    pub total_ms: u64,
}

fn method_code(m: Method) -> u64 {
    match m {
        Method::Ia => 1,
        Method::Ca => 2,
        Method::FedAvg => 3,
        Method::FedProx => 4,
        Method::Dc => 5,
    }
}

/// Derives the journal anomaly counts for a requested test ratio: globals
/// take half, and a third of the locals are recurring-amount corruptions.
fn journal_plan_for(spec: &AnomalySpec) -> JournalAnomalyPlan {
    let recurring = spec.n_local / 3;
    JournalAnomalyPlan {
        n_global: spec.n_global,
        n_pair_local: spec.n_local - recurring,
        n_recurring_local: recurring,
        ..JournalAnomalyPlan::default()
    }
}

fn prepare_synthetic(cfg: &ExperimentConfig) -> Result<PreparedData> {
    let train = gen_synthetic_normal(
        cfg.orgs * cfg.train_per_org,
        seeding::derive(cfg.seed, &[TAG_DATA]),
    )?;
    let plan = PartitionPlan::new(cfg.setting, cfg.orgs, seeding::derive(cfg.seed, &[TAG_SPLIT]))?;
    let splits = plan.split(&train)?;
    let normals = gen_synthetic_normal(cfg.test_size, seeding::derive(cfg.seed, &[TAG_TEST]))?;
    let mut tests = Vec::with_capacity(cfg.ratios.len());
    for (i, &ratio) in cfg.ratios.iter().enumerate() {
        let spec = AnomalySpec::for_test_size(ratio, cfg.test_size)?;
        let test =
            inject_synthetic_anomalies(&normals, &spec, seeding::derive(cfg.seed, &[TAG_INJECT, i as u64]))?;
        tests.push((ratio, test));
    }
    Ok(PreparedData { schema: train.schema.clone(), splits, tests })
}

/// Unencoded journal material, row-for-row identical to the encoded splits
/// and tests that `prepare_data` produces for journal datasets.
pub struct RawJournalData {
    pub org_entries: Vec<Vec<JournalEntry>>,
    /// `(ratio, entries, labels)` per test set.
    pub tests: Vec<(f64, Vec<JournalEntry>, Vec<Label>)>,
}

/// Splits a pooled entry list by assigning encoded rows, so the raw split
/// matches what partitioning the encoded pool would select.
fn split_raw_entries(
    cfg: &ExperimentConfig,
    schema: &Schema,
    pooled: &[JournalEntry],
) -> Result<Vec<Vec<JournalEntry>>> {
    let features = encode_entries(schema, pooled)?;
    let all =
        LabeledDataset::new(schema.clone(), features, vec![Label::Normal; pooled.len()])?;
    let plan = PartitionPlan::new(cfg.setting, cfg.orgs, seeding::derive(cfg.seed, &[TAG_SPLIT]))?;
    Ok(plan
        .assign(&all)?
        .iter()
        .map(|rows| rows.iter().map(|&r| pooled[r].clone()).collect())
        .collect())
}

fn journal_surrogate_raw(cfg: &ExperimentConfig) -> Result<(Schema, RawJournalData)> {
    let data_seed = seeding::derive(cfg.seed, &[TAG_DATA]);
    let counts = vec![cfg.train_per_org; cfg.orgs];
    let corpus = gen_journal_corpus(cfg.orgs, &counts, data_seed)?;
    let pooled: Vec<JournalEntry> = corpus.iter().flatten().cloned().collect();
    let schema = fit_schema(&pooled)?;

    let org_entries = if cfg.setting == PartitionMode::Natural {
        corpus
    } else {
        split_raw_entries(cfg, &schema, &pooled)?
    };

    // Test entries are a fresh draw from the first organization's book: the
    // deployment question is "does this detector flag problems in one
    // organization's ledger", so the shared test set mirrors one
    // organization's activity rather than a blend no single organization
    // would ever produce. (Methods with per-organization state — the
    // collaboration view, the individual baseline — score it as that
    // organization.)
    let generator = JournalGenerator::new(JournalConfig::default(), data_seed)?;
    let draw = seeding::derive(cfg.seed, &[TAG_TEST, 0]);
    let test_entries = generator.organization_entries(0, cfg.test_size, draw)?;

    let mut tests = Vec::with_capacity(cfg.ratios.len());
    for (i, &ratio) in cfg.ratios.iter().enumerate() {
        let spec = AnomalySpec::for_test_size(ratio, test_entries.len())?;
        let plan = journal_plan_for(&spec);
        let (entries, labels) = inject_journal_anomalies_with(
            &test_entries,
            &plan,
            seeding::derive(cfg.seed, &[TAG_INJECT, i as u64]),
        )?;
        tests.push((ratio, entries, labels));
    }
    Ok((schema, RawJournalData { org_entries, tests }))
}

fn journal_csv_raw(cfg: &ExperimentConfig) -> Result<(Schema, RawJournalData)> {
    let train_path = cfg
        .journal_train
        .as_ref()
        .ok_or_else(|| Error::Validation("journal_csv needs journal_train".into()))?;
    let test_path = cfg
        .journal_test
        .as_ref()
        .ok_or_else(|| Error::Validation("journal_csv needs journal_test".into()))?;

    let pooled = load_journal_csv(train_path)?;
    let schema = fit_schema(&pooled)?;
    let org_entries = split_raw_entries(cfg, &schema, &pooled)?;

    let (test_entries, labels) = load_labeled_journal_csv(test_path)?;
    if !labels.iter().any(|l| l.is_anomaly()) {
        return Err(Error::Validation("labeled test set has no anomalies".into()));
    }
    let measured = labels.iter().filter(|l| l.is_anomaly()).count() as f64 / labels.len() as f64;
    Ok((schema, RawJournalData { org_entries, tests: vec![(measured, test_entries, labels)] }))
}

/// The raw journal rows behind `prepare_data`, for emitting CSVs. Only
/// journal datasets have a raw journal form.
pub fn raw_journal_data(cfg: &ExperimentConfig) -> Result<RawJournalData> {
    cfg.validate()?;
    match cfg.dataset {
        DatasetKind::JournalSurrogate => Ok(journal_surrogate_raw(cfg)?.1),
        DatasetKind::JournalCsv => Ok(journal_csv_raw(cfg)?.1),
        DatasetKind::Synthetic => Err(Error::InvalidArgument(
            "synthetic data has no journal form; decode the prepared splits instead".into(),
        )),
    }
}

fn encode_raw_journal(schema: &Schema, raw: &RawJournalData) -> Result<PreparedData> {
    let splits = raw
        .org_entries
        .iter()
        .map(|entries| {
            let features = encode_entries(schema, entries)?;
            LabeledDataset::new(schema.clone(), features, vec![Label::Normal; entries.len()])
        })
        .collect::<Result<Vec<_>>>()?;
    let tests = raw
        .tests
        .iter()
        .map(|(ratio, entries, labels)| {
            let features = encode_entries(schema, entries)?;
            Ok((*ratio, LabeledDataset::new(schema.clone(), features, labels.clone())?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PreparedData { schema: schema.clone(), splits, tests })
}

/// Generates (or loads) training splits and the per-ratio test sets.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData> {
    cfg.validate()?;
    match cfg.dataset {
        DatasetKind::Synthetic => prepare_synthetic(cfg),
        DatasetKind::JournalSurrogate => {
            let (schema, raw) = journal_surrogate_raw(cfg)?;
            encode_raw_journal(&schema, &raw)
        }
        DatasetKind::JournalCsv => {
            let (schema, raw) = journal_csv_raw(cfg)?;
            encode_raw_journal(&schema, &raw)
        }
    }
}

/// Runs one grid cell: train under the method, score the ratio's test set.
pub fn run_cell(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    method: Method,
    lambda: usize,
    ratio_idx: usize,
    rep: usize,
) -> Result<ExperimentRow> {
    if lambda == 0 || lambda > data.splits.len() {
        return Err(Error::InvalidArgument(format!(
            "{} participants requested from {} splits",
            lambda,
            data.splits.len()
        )));
    }
    let (ratio, test) = &data.tests[ratio_idx];
    let participants = &data.splits[..lambda];
    let cell_seed = seeding::derive(
        cfg.seed,
        &[TAG_CELL, method_code(method), lambda as u64, ratio_idx as u64, rep as u64],
    );

    let train_cfg = TrainConfig {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        learning_rate: cfg.learning_rate,
        ..TrainConfig::default()
    };
    let fed = FedConfig { rounds: cfg.rounds, local_epochs: cfg.local_epochs, mu: cfg.mu };
    let anchor = AnchorConfig {
        rows: cfg.anchor_rows,
        target_dim: cfg.m_tilde,
        collab_dim: cfg.m_hat,
    };

    let started = Instant::now();
    let run = match method {
        Method::Ia | Method::Ca | Method::FedAvg | Method::FedProx => {
            let head = OutputHead::Mixed(HeadLayout::from_schema(&data.schema));
            let arch = cfg.arch.build(data.schema.dim(), head)?;
            match method {
                Method::Ia => run_ia(&participants[0], &arch, &train_cfg, cell_seed)?,
                Method::Ca => run_ca(participants, &arch, &train_cfg, cell_seed)?,
                Method::FedAvg => run_fedavg(participants, &arch, &fed, &train_cfg, cell_seed)?,
                Method::FedProx => run_fedprox(participants, &arch, &fed, &train_cfg, cell_seed)?,
                Method::Dc => unreachable!(),
            }
        }
        Method::Dc => run_dc(participants, &anchor, cfg.arch, &train_cfg, cell_seed)?,
    };
    let train_ms = started.elapsed().as_millis() as u64;

    let scoring = Instant::now();
    let scores = run.scorer.score(&test.features)?;
    let scored = ScoredSet::new(scores, test.labels.clone())?;
    let triple = ap_triple_with(&scored, cfg.exclude_other_type)?;
    let score_ms = scoring.elapsed().as_millis() as u64;

    Ok(ExperimentRow {
        method,
        setting: cfg.setting,
        lambda,
        ratio: *ratio,
        rep,
        triple,
        uploads: Some(run.ledger.total_uploads()),
        downloads: Some(run.ledger.total_downloads()),
        train_ms,
        score_ms,
    })
}

/// Runs the full grid. Cell errors become recorded failures; only
/// preparation errors abort the run.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunResult> {
    run_experiment_where(cfg, |_, _, _, _| true)
}

/// Runs the grid cells selected by `keep(method, lambda, ratio, rep)` —
/// e.g. a single cell — with the same seeds those cells get in a full run.
pub fn run_experiment_where<F>(cfg: &ExperimentConfig, keep: F) -> Result<RunResult>
where
    F: Fn(Method, usize, f64, usize) -> bool + Sync,
{
    cfg.validate()?;
    let started = Instant::now();
    let data = prepare_data(cfg)?;
    let prep_ms = started.elapsed().as_millis() as u64;

    let mut cells = Vec::new();
    for &method in &cfg.methods {
        for &lambda in &cfg.lambdas {
            for (ratio_idx, (ratio, _)) in data.tests.iter().enumerate() {
                for rep in 0..cfg.reps {
                    if keep(method, lambda, *ratio, rep) {
                        cells.push((method, lambda, ratio_idx, rep));
                    }
                }
            }
        }
    }

    let outcomes: Vec<_> = cells
        .par_iter()
        .map(|&(method, lambda, ratio_idx, rep)| {
            let outcome = run_cell(cfg, &data, method, lambda, ratio_idx, rep);
            (method, lambda, ratio_idx, rep, outcome)
        })
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (method, lambda, ratio_idx, rep, outcome) in outcomes {
        match outcome {
            Ok(row) => rows.push(row),
            Err(e) => failures.push(CellFailure {
                method,
                setting: cfg.setting,
                lambda,
                ratio: data.tests[ratio_idx].0,
                rep,
                message: error_chain(&e),
            }),
        }
    }
    let sort_key = |m: Method, l: usize, r: f64, rep: usize| {
        (method_code(m), l, r.to_bits(), rep)
    };
    rows.sort_by_key(|r| sort_key(r.method, r.lambda, r.ratio, r.rep));
    failures.sort_by_key(|f| sort_key(f.method, f.lambda, f.ratio, f.rep));

    Ok(RunResult {
        fingerprint: cfg.fingerprint(),
        rows,
        failures,
        prep_ms,
        total_ms: started.elapsed().as_millis() as u64,
    })
}

/// Renders an error with its full source chain on one line.
fn error_chain(e: &Error) -> String {
    let mut msg = e.to_string();
    let mut source = std::error::Error::source(e);
    while let Some(s) = source {
        msg.push_str(": ");
        msg.push_str(&s.to_string());
        source = s.source();
    }
    msg
}
