//! Command-line driver: generate data, split CSVs across organizations,
//! run the experiment grid, and re-aggregate reports.
//!
//! Every artifact lands under `--out-dir`. Exit code 0 means everything
//! succeeded, 2 means the grid finished but some cells failed (see
//! `errors.jsonl`), and 1 means the command itself failed (also logged to
//! `errors.jsonl` as a `fatal` record).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use auditfl::dataset::{
    decode_rows, load_journal_csv, load_labeled_journal_csv, load_labeled_synthetic_csv, Label,
    LabeledDataset, Record, Schema, SyntheticRow,
};
use auditfl::dataset::{
    fit_schema, synthetic_schema, write_journal_csv, write_labeled_journal_csv,
    write_labeled_synthetic_csv,
};
use auditfl::error::Error;
use auditfl::experiment::{
    parse_results_csv, prepare_data, raw_journal_data, run_experiment_where, write_reports,
    DatasetKind, ExperimentConfig, RunResult,
};
use auditfl::federated::Method;
use auditfl::partition::{PartitionMode, PartitionPlan};

#[derive(Parser)]
#[command(
    name = "auditfl",
    about = "Cross-organization anomaly detection without sharing raw records or models",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Override the configuration's base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory for generated files, reports, and error logs.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    /// Worker threads for grid cells (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured dataset: per-organization training CSVs and
    /// one labeled test CSV per anomaly ratio.
    Gen {
        /// Flat TOML experiment configuration (defaults used if omitted).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Partition an existing CSV into per-organization CSVs. The format is
    /// detected from the header (journal, labeled journal, or synthetic).
    Split {
        /// Input CSV of training rows (must be anomaly-free).
        #[arg(long)]
        input: PathBuf,
        /// Number of organizations.
        #[arg(long, default_value_t = 8)]
        orgs: usize,
        /// iid or noniid.
        #[arg(long, default_value = "iid")]
        setting: String,
    },
    /// Run the experiment grid described by a configuration.
    Run {
        /// Flat TOML experiment configuration (defaults used if omitted).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Run only this method (ia, ca, fedavg, fedprox, dc).
        #[arg(long)]
        method: Option<String>,
        /// Run only this participant count.
        #[arg(long)]
        lambda: Option<usize>,
        /// Run only this anomaly ratio (must appear in the grid).
        #[arg(long)]
        ratio: Option<f64>,
        /// Run only this repetition index.
        #[arg(long)]
        rep: Option<usize>,
    },
    /// Re-aggregate and re-rank an existing results CSV.
    Report {
        /// A results.csv produced by `run`.
        #[arg(long)]
        results: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        // Ignore the error: the pool can only be configured once.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    match dispatch(&cli) {
        Ok(cell_failures) if cell_failures == 0 => ExitCode::SUCCESS,
        Ok(cell_failures) => {
            eprintln!(
                "{} grid cell(s) failed; see {}",
                cell_failures,
                cli.out_dir.join("errors.jsonl").display()
            );
            ExitCode::from(2)
        }
        Err(e) => {
            let msg = error_chain(&e);
            log_fatal(&cli.out_dir, &msg);
            eprintln!("error: {}", msg);
            ExitCode::FAILURE
        }
    }
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

/// Best-effort machine-readable log of a command-level failure.
fn log_fatal(out_dir: &Path, msg: &str) {
    if std::fs::create_dir_all(out_dir).is_err() {
        return;
    }
    let line = serde_json::json!({ "scope": "fatal", "error": msg });
    let _ = std::fs::write(out_dir.join("errors.jsonl"), format!("{}\n", line));
}

fn load_config(path: &Option<PathBuf>, seed: Option<u64>) -> Result<ExperimentConfig, Error> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

/// Returns the number of failed grid cells (0 for non-grid commands).
fn dispatch(cli: &Cli) -> Result<usize, Error> {
    match &cli.command {
        Command::Gen { config } => {
            let cfg = load_config(config, cli.seed)?;
            gen_files(&cfg, &cli.out_dir)?;
            Ok(0)
        }
        Command::Split { input, orgs, setting } => {
            split_file(input, *orgs, setting, cli.seed.unwrap_or(0), &cli.out_dir)?;
            Ok(0)
        }
        Command::Run { config, method, lambda, ratio, rep } => {
            let cfg = load_config(config, cli.seed)?;
            let want_method = method
                .as_deref()
                .map(|s| {
                    Method::parse(s).ok_or_else(|| {
                        Error::InvalidArgument(format!("unknown method {:?}", s))
                    })
                })
                .transpose()?;
            let result = run_experiment_where(&cfg, |m, l, r, rp| {
                want_method.map_or(true, |wm| wm == m)
                    && lambda.map_or(true, |wl| wl == l)
                    && ratio.map_or(true, |wr| (wr - r).abs() < 1e-12)
                    && rep.map_or(true, |wrep| wrep == rp)
            })?;
            if result.rows.is_empty() && result.failures.is_empty() {
                return Err(Error::InvalidArgument(
                    "the requested filters match no grid cell".into(),
                ));
            }
            let paths = write_reports(&result, &cli.out_dir)?;
            std::fs::write(cli.out_dir.join("config_used.toml"), cfg.to_toml_string())?;
            println!(
                "{} row(s), {} failure(s), total {} ms",
                result.rows.len(),
                result.failures.len(),
                result.total_ms
            );
            for p in &paths {
                println!("wrote {}", p.display());
            }
            Ok(result.failures.len())
        }
        Command::Report { results } => {
            let rows = parse_results_csv(&std::fs::read_to_string(results)?)?;
            let result = RunResult {
                fingerprint: format!("reloaded from {}", results.display()),
                rows,
                failures: vec![],
                prep_ms: 0,
                total_ms: 0,
            };
            let paths = write_reports(&result, &cli.out_dir)?;
            for p in &paths {
                println!("wrote {}", p.display());
            }
            Ok(0)
        }
    }
}

/// File name for the test set of one anomaly ratio.
fn test_file_name(ratio: f64) -> String {
    format!("test_ratio_{}.csv", ratio)
}

fn gen_files(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(out_dir)?;
    match cfg.dataset {
        DatasetKind::Synthetic => {
            let data = prepare_data(cfg)?;
            for (k, split) in data.splits.iter().enumerate() {
                let rows = decode_rows(split);
                let path = out_dir.join(format!("org_{}_train.csv", k));
                write_labeled_synthetic_csv(&path, &rows, &split.labels)?;
                println!("wrote {} ({} rows)", path.display(), rows.len());
            }
            for (ratio, test) in &data.tests {
                let rows = decode_rows(test);
                let path = out_dir.join(test_file_name(*ratio));
                write_labeled_synthetic_csv(&path, &rows, &test.labels)?;
                println!("wrote {} ({} rows)", path.display(), rows.len());
            }
        }
        DatasetKind::JournalSurrogate | DatasetKind::JournalCsv => {
            let raw = raw_journal_data(cfg)?;
            for (k, entries) in raw.org_entries.iter().enumerate() {
                let path = out_dir.join(format!("org_{}_train.csv", k));
                write_journal_csv(&path, entries)?;
                println!("wrote {} ({} rows)", path.display(), entries.len());
            }
            for (ratio, entries, labels) in &raw.tests {
                let path = out_dir.join(test_file_name(*ratio));
                write_labeled_journal_csv(&path, entries, labels)?;
                println!("wrote {} ({} rows)", path.display(), entries.len());
            }
        }
    }
    Ok(())
}

/// The three recognizable input headers.
enum SplitInput {
    Journal(Vec<auditfl::dataset::JournalEntry>),
    LabeledJournal(Vec<auditfl::dataset::JournalEntry>, Vec<Label>),
    Synthetic(Vec<SyntheticRow>, Vec<Label>),
}

fn sniff_input(path: &Path) -> Result<SplitInput, Error> {
    let text = std::fs::read_to_string(path)?;
    let header = text.lines().next().unwrap_or_default().trim();
    match header {
        "debit,credit,amount" => Ok(SplitInput::Journal(load_journal_csv(path)?)),
        "debit,credit,amount,label" => {
            let (entries, labels) = load_labeled_journal_csv(path)?;
            Ok(SplitInput::LabeledJournal(entries, labels))
        }
        "a,b,c,label" => {
            let (rows, labels) = load_labeled_synthetic_csv(path)?;
            Ok(SplitInput::Synthetic(rows, labels))
        }
        other => Err(Error::Schema(format!(
            "unrecognized header {:?}; expected a journal, labeled journal, or synthetic CSV",
            other
        ))),
    }
}

fn parse_split_setting(s: &str) -> Result<PartitionMode, Error> {
    match s {
        "noniid" => Ok(PartitionMode::NoniidKmeans),
        other => match PartitionMode::parse(other) {
            Some(PartitionMode::Natural) | None => Err(Error::InvalidArgument(format!(
                "setting {:?} cannot split a pooled file (iid, noniid)",
                s
            ))),
            Some(mode) => Ok(mode),
        },
    }
}

fn split_file(
    input: &Path,
    orgs: usize,
    setting: &str,
    seed: u64,
    out_dir: &Path,
) -> Result<(), Error> {
    let mode = parse_split_setting(setting)?;
    std::fs::create_dir_all(out_dir)?;
    let plan = PartitionPlan::new(mode, orgs, seed)?;

    let assign_encoded = |schema: Schema, records: &[Record], labels: Vec<Label>| {
        let features = schema.encode(records)?;
        let data = LabeledDataset::new(schema, features, labels)?;
        plan.assign(&data)
    };

    match sniff_input(input)? {
        SplitInput::Journal(entries) => {
            let schema = fit_schema(&entries)?;
            let records: Vec<Record> = entries.iter().map(|e| e.to_record()).collect();
            let assign = assign_encoded(schema, &records, vec![Label::Normal; entries.len()])?;
            for (k, rows) in assign.iter().enumerate() {
                let part: Vec<_> = rows.iter().map(|&r| entries[r].clone()).collect();
                let path = out_dir.join(format!("org_{}.csv", k));
                write_journal_csv(&path, &part)?;
                println!("wrote {} ({} rows)", path.display(), part.len());
            }
        }
        SplitInput::LabeledJournal(entries, labels) => {
            let schema = fit_schema(&entries)?;
            let records: Vec<Record> = entries.iter().map(|e| e.to_record()).collect();
            let assign = assign_encoded(schema, &records, labels.clone())?;
            for (k, rows) in assign.iter().enumerate() {
                let part: Vec<_> = rows.iter().map(|&r| entries[r].clone()).collect();
                let part_labels: Vec<_> = rows.iter().map(|&r| labels[r]).collect();
                let path = out_dir.join(format!("org_{}.csv", k));
                write_labeled_journal_csv(&path, &part, &part_labels)?;
                println!("wrote {} ({} rows)", path.display(), part.len());
            }
        }
        SplitInput::Synthetic(rows, labels) => {
            let schema = synthetic_schema();
            let records: Vec<Record> = rows
                .iter()
                .map(|r| Record {
                    categories: vec![r.a.to_string(), r.b.to_string()],
                    values: vec![r.c],
                })
                .collect();
            let assign = assign_encoded(schema, &records, labels.clone())?;
            for (k, idx) in assign.iter().enumerate() {
                let part: Vec<_> = idx.iter().map(|&r| rows[r].clone()).collect();
                let part_labels: Vec<_> = idx.iter().map(|&r| labels[r]).collect();
                let path = out_dir.join(format!("org_{}.csv", k));
                write_labeled_synthetic_csv(&path, &part, &part_labels)?;
                println!("wrote {} ({} rows)", path.display(), part.len());
            }
        }
    }
    Ok(())
}
