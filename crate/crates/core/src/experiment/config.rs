//! Flat key-value experiment configuration.
//!
//! A configuration is a flat TOML document — every key at the top level,
//! scalars or comma-separated lists, no tables — so a run is fully described
//! by one short file plus a seed. Unknown keys are rejected rather than
//! ignored, so typos fail loudly instead of silently running defaults.

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::federated::{ArchKind, Method};
use crate::partition::PartitionMode;

/// Which data family the experiment runs on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetKind {
    /// Generated `(a, b, c)` records.
    Synthetic,
    /// Caller-provided journal CSVs (unlabeled train, labeled test).
    JournalCsv,
    /// Generated multi-organization journal corpus.
    JournalSurrogate,
}

impl DatasetKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "synthetic" => Some(DatasetKind::Synthetic),
            "journal_csv" => Some(DatasetKind::JournalCsv),
            "journal_surrogate" => Some(DatasetKind::JournalSurrogate),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetKind::Synthetic => "synthetic",
            DatasetKind::JournalCsv => "journal_csv",
            DatasetKind::JournalSurrogate => "journal_surrogate",
        }
    }
}

/// Everything a full experiment run depends on. See `from_toml_str` for the
/// key list; `to_toml_string` emits the same document back canonically.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub dataset: DatasetKind,
    pub setting: PartitionMode,
    pub methods: Vec<Method>,
    pub orgs: usize,
    /// Participating-organization counts to sweep (prefixes of the split
    /// list).
    pub lambdas: Vec<usize>,
    /// Test-set anomaly fractions to sweep.
    pub ratios: Vec<f64>,
    pub reps: usize,
    pub seed: u64,
    /// Training rows per organization (generated datasets).
    pub train_per_org: usize,
    /// Test rows before injection (generated datasets).
    pub test_size: usize,
    /// Anchor rows r shared by every organization.
    pub anchor_rows: usize,
    /// Per-organization reduced dimension; absent means one below the
    /// encoded width.
    pub m_tilde: Option<usize>,
    /// Collaboration-space dimension; absent means the smallest reduced
    /// dimension.
    pub m_hat: Option<usize>,
    /// Proximal strength for FedProx.
    pub mu: f64,
    /// Total epochs for single-model training (IA/CA/DC).
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Aggregation rounds for FedAvg/FedProx.
    pub rounds: usize,
    /// Local epochs per aggregation round.
    pub local_epochs: usize,
    pub arch: ArchKind,
    /// Per-type AP pools drop the other anomaly type (vs counting it as a
    /// negative).
    pub exclude_other_type: bool,
    pub journal_train: Option<PathBuf>,
    pub journal_test: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetKind::Synthetic,
            setting: PartitionMode::Iid,
            methods: vec![Method::Ia, Method::Ca, Method::FedAvg, Method::FedProx, Method::Dc],
            orgs: 8,
            lambdas: vec![8],
            ratios: vec![0.25, 0.10, 0.05],
            reps: 10,
            seed: 7,
            train_per_org: 200,
            test_size: 200,
            anchor_rows: 1000,
            m_tilde: None,
            m_hat: None,
            mu: 0.1,
            epochs: 200,
            learning_rate: 1e-3,
            batch_size: 32,
            rounds: 10,
            local_epochs: 20,
            arch: ArchKind::Small,
            exclude_other_type: true,
            journal_train: None,
            journal_test: None,
        }
    }
}

fn bad(key: &str, detail: impl std::fmt::Display) -> Error {
    Error::Validation(format!("config key `{}`: {}", key, detail))
}

fn as_usize(key: &str, v: &toml::Value) -> Result<usize> {
    match v {
        toml::Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => Err(bad(key, "expected a non-negative integer")),
    }
}

fn as_u64(key: &str, v: &toml::Value) -> Result<u64> {
    match v {
        toml::Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        _ => Err(bad(key, "expected a non-negative integer")),
    }
}

fn as_f64(key: &str, v: &toml::Value) -> Result<f64> {
    match v {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(bad(key, "expected a number")),
    }
}

fn as_str<'v>(key: &str, v: &'v toml::Value) -> Result<&'v str> {
    v.as_str().ok_or_else(|| bad(key, "expected a string"))
}

fn as_bool(key: &str, v: &toml::Value) -> Result<bool> {
    v.as_bool().ok_or_else(|| bad(key, "expected true or false"))
}

/// Splits either a TOML array or a comma-separated string into items.
fn list_items(key: &str, v: &toml::Value) -> Result<Vec<toml::Value>> {
    match v {
        toml::Value::Array(items) => Ok(items.clone()),
        toml::Value::String(s) => Ok(s
            .split(',')
            .map(|p| p.trim())
            .filter(|p| !p.is_empty())
            .map(|p| toml::Value::String(p.to_string()))
            .collect()),
        _ => Err(bad(key, "expected a list or a comma-separated string")),
    }
}

fn parse_setting(key: &str, s: &str) -> Result<PartitionMode> {
    // "noniid" is accepted as shorthand for the k-means split.
    if s == "noniid" {
        return Ok(PartitionMode::NoniidKmeans);
    }
    PartitionMode::parse(s)
        .ok_or_else(|| bad(key, format!("unknown setting {:?} (iid, noniid, natural)", s)))
}

impl ExperimentConfig {
    /// Parses a flat TOML document. Every key is optional and defaults to
    /// the standard synthetic study; unknown keys are errors.
    pub fn from_toml_str(doc: &str) -> Result<Self> {
        let table: toml::Table =
            doc.parse().map_err(|e| Error::Validation(format!("config is not valid TOML: {}", e)))?;
        let mut cfg = ExperimentConfig::default();
        let mut arch_explicit = false;

        for (key, value) in &table {
            match key.as_str() {
                "dataset" => {
                    let s = as_str(key, value)?;
                    cfg.dataset = DatasetKind::parse(s).ok_or_else(|| {
                        bad(key, format!("unknown dataset {:?} (synthetic, journal_csv, journal_surrogate)", s))
                    })?;
                }
                "setting" => cfg.setting = parse_setting(key, as_str(key, value)?)?,
                "methods" => {
                    cfg.methods = list_items(key, value)?
                        .iter()
                        .map(|v| {
                            let s = as_str(key, v)?;
                            Method::parse(s).ok_or_else(|| {
                                bad(key, format!("unknown method {:?} (ia, ca, fedavg, fedprox, dc)", s))
                            })
                        })
                        .collect::<Result<_>>()?;
                }
                "orgs" => cfg.orgs = as_usize(key, value)?,
                "lambdas" => {
                    cfg.lambdas = list_items(key, value)?
                        .iter()
                        .map(|v| match v {
                            toml::Value::String(s) => s
                                .parse::<usize>()
                                .map_err(|_| bad(key, format!("bad count {:?}", s))),
                            other => as_usize(key, other),
                        })
                        .collect::<Result<_>>()?;
                }
                "ratios" => {
                    cfg.ratios = list_items(key, value)?
                        .iter()
                        .map(|v| match v {
                            toml::Value::String(s) => s
                                .parse::<f64>()
                                .map_err(|_| bad(key, format!("bad ratio {:?}", s))),
                            other => as_f64(key, other),
                        })
                        .collect::<Result<_>>()?;
                }
                "reps" => cfg.reps = as_usize(key, value)?,
                "seed" => cfg.seed = as_u64(key, value)?,
                "train_per_org" => cfg.train_per_org = as_usize(key, value)?,
                "test_size" => cfg.test_size = as_usize(key, value)?,
                "anchor_rows" => cfg.anchor_rows = as_usize(key, value)?,
                "m_tilde" => cfg.m_tilde = Some(as_usize(key, value)?),
                "m_hat" => cfg.m_hat = Some(as_usize(key, value)?),
                "mu" => cfg.mu = as_f64(key, value)?,
                "epochs" => cfg.epochs = as_usize(key, value)?,
                "learning_rate" => cfg.learning_rate = as_f64(key, value)?,
                "batch_size" => cfg.batch_size = as_usize(key, value)?,
                "rounds" => cfg.rounds = as_usize(key, value)?,
                "local_epochs" => cfg.local_epochs = as_usize(key, value)?,
                "arch" => {
                    let s = as_str(key, value)?;
                    cfg.arch = ArchKind::parse(s)
                        .ok_or_else(|| bad(key, format!("unknown architecture {:?} (small, deep)", s)))?;
                    arch_explicit = true;
                }
                "exclude_other_type" => cfg.exclude_other_type = as_bool(key, value)?,
                "journal_train" => cfg.journal_train = Some(PathBuf::from(as_str(key, value)?)),
                "journal_test" => cfg.journal_test = Some(PathBuf::from(as_str(key, value)?)),
                other => return Err(Error::Validation(format!("unknown configuration key `{}`", other))),
            }
        }

        // Journal records encode much wider than the synthetic triple and
        // get the deep stack unless the file says otherwise.
        if !arch_explicit && cfg.dataset != DatasetKind::Synthetic {
            cfg.arch = ArchKind::Deep;
        }

        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(bad("methods", "need at least one method"));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(bad("methods", format!("duplicate method {}", m.as_str())));
            }
        }
        if self.reps == 0 {
            return Err(bad("reps", "need at least one repetition"));
        }
        let min_orgs = if self.setting == PartitionMode::Natural { 1 } else { 2 };
        if self.orgs < min_orgs {
            return Err(bad("orgs", format!("need at least {}", min_orgs)));
        }
        if self.lambdas.is_empty() {
            return Err(bad("lambdas", "need at least one participant count"));
        }
        for &l in &self.lambdas {
            if l == 0 || l > self.orgs {
                return Err(bad("lambdas", format!("{} outside [1, orgs = {}]", l, self.orgs)));
            }
        }
        if self.dataset != DatasetKind::JournalCsv {
            if self.ratios.is_empty() {
                return Err(bad("ratios", "need at least one anomaly ratio"));
            }
            for &r in &self.ratios {
                if !(r > 0.0 && r < 1.0) {
                    return Err(bad("ratios", format!("{} outside (0, 1)", r)));
                }
            }
            if self.journal_train.is_some() || self.journal_test.is_some() {
                return Err(bad("journal_train", "only meaningful with dataset = journal_csv"));
            }
        } else {
            if self.journal_train.is_none() || self.journal_test.is_none() {
                return Err(bad("journal_train", "journal_csv needs journal_train and journal_test"));
            }
        }
        if self.setting == PartitionMode::Natural && self.dataset != DatasetKind::JournalSurrogate {
            return Err(bad("setting", "natural splits exist only for journal_surrogate"));
        }
        if self.train_per_org == 0 {
            return Err(bad("train_per_org", "need at least one row"));
        }
        if self.test_size == 0 {
            return Err(bad("test_size", "need at least one row"));
        }
        if self.anchor_rows == 0 {
            return Err(bad("anchor_rows", "need at least one anchor row"));
        }
        if self.m_tilde == Some(0) {
            return Err(bad("m_tilde", "must be positive when given"));
        }
        if self.m_hat == Some(0) {
            return Err(bad("m_hat", "must be positive when given"));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(bad("mu", "must be finite and non-negative"));
        }
        if self.epochs == 0 || self.rounds == 0 || self.local_epochs == 0 {
            return Err(bad("epochs", "epochs, rounds, and local_epochs must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(bad("learning_rate", "must be finite and positive"));
        }
        if self.batch_size == 0 {
            return Err(bad("batch_size", "need at least one sample per batch"));
        }
        Ok(())
    }

    /// Canonical flat TOML for this configuration; parsing it back yields
    /// an equal config. Doubles as the run fingerprint.
    pub fn to_toml_string(&self) -> String {
        let mut s = String::new();
        let kv = |s: &mut String, k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv(&mut s, "dataset", format!("{:?}", self.dataset.as_str()));
        kv(&mut s, "setting", format!("{:?}", self.setting.as_str()));
        let methods: Vec<&str> = self.methods.iter().map(|m| m.as_str()).collect();
        kv(&mut s, "methods", format!("{:?}", methods.join(",")));
        kv(&mut s, "orgs", self.orgs.to_string());
        let lambdas: Vec<String> = self.lambdas.iter().map(|l| l.to_string()).collect();
        kv(&mut s, "lambdas", format!("{:?}", lambdas.join(",")));
        let ratios: Vec<String> = self.ratios.iter().map(|r| r.to_string()).collect();
        kv(&mut s, "ratios", format!("{:?}", ratios.join(",")));
        kv(&mut s, "reps", self.reps.to_string());
        kv(&mut s, "seed", self.seed.to_string());
        kv(&mut s, "train_per_org", self.train_per_org.to_string());
        kv(&mut s, "test_size", self.test_size.to_string());
        kv(&mut s, "anchor_rows", self.anchor_rows.to_string());
        if let Some(m) = self.m_tilde {
            kv(&mut s, "m_tilde", m.to_string());
        }
        if let Some(m) = self.m_hat {
            kv(&mut s, "m_hat", m.to_string());
        }
        kv(&mut s, "mu", fmt_f64(self.mu));
        kv(&mut s, "epochs", self.epochs.to_string());
        kv(&mut s, "learning_rate", fmt_f64(self.learning_rate));
        kv(&mut s, "batch_size", self.batch_size.to_string());
        kv(&mut s, "rounds", self.rounds.to_string());
        kv(&mut s, "local_epochs", self.local_epochs.to_string());
        kv(&mut s, "arch", format!("{:?}", self.arch.as_str()));
        kv(&mut s, "exclude_other_type", self.exclude_other_type.to_string());
        if let Some(p) = &self.journal_train {
            kv(&mut s, "journal_train", format!("{:?}", p.display().to_string()));
        }
        if let Some(p) = &self.journal_test {
            kv(&mut s, "journal_test", format!("{:?}", p.display().to_string()));
        }
        s
    }

    /// Stable one-line identity of this configuration.
    pub fn fingerprint(&self) -> String {
        self.to_toml_string().replace('\n', "; ").trim_end_matches("; ").to_string()
    }
}

/// Formats a float so TOML re-reads it as a float (keeps a decimal point).
fn fmt_f64(v: f64) -> String {
    let s = v.to_string();
    if s.contains('.') || s.contains('e') || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{}.0", s)
    }
}
