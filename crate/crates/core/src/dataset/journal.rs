//! Journal-entry records: surrogate corpus generation, schema fitting, and
//! anomaly injection.
//!
//! The generator produces double-entry records shaped like small-clinic
//! bookkeeping: a few dozen active account pairs per organization, Zipf-like
//! pair frequencies that differ between organizations, heavy-tailed amounts
//! (log-uniform medians across pairs, lognormal within a pair), recurring
//! monthly transactions with fixed amounts, and a couple of high-amount
//! insurance flows shared by everyone. Anomaly injection mirrors the audit
//! setting: blown-up largest amounts (global), implausible account pairs and
//! shifted recurring amounts (local).

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::dataset::schema::{Record, Schema, Transform};
use crate::dataset::{sample_distinct, standard_normal, Label};
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::seeding;

/// One double-entry bookkeeping record.
#[derive(Clone, Debug, PartialEq)]
pub struct JournalEntry {
    pub debit: String,
    pub credit: String,
    pub amount: f64,
}

impl JournalEntry {
    pub fn new(debit: impl Into<String>, credit: impl Into<String>, amount: f64) -> Result<Self> {
        if !(amount > 0.0) || !amount.is_finite() {
            return Err(Error::Validation(format!("amount must be positive, got {}", amount)));
        }
        Ok(JournalEntry { debit: debit.into(), credit: credit.into(), amount })
    }

    /// The schema-facing view of this entry: two categorical tokens plus
    /// the amount.
    pub fn to_record(&self) -> Record {
        Record {
            categories: vec![self.debit.clone(), self.credit.clone()],
            values: vec![self.amount],
        }
    }
}

/// Chart of accounts the generator draws from. The same chart serves both
/// sides of an entry; the first few accounts take part in the fixed
/// high-amount insurance flows, so they exist for every vocabulary size.
const ACCOUNT_CHART: [&str; 80] = [
    "Ordinary deposits",
    "Accounts receivable",
    "Medical fees revenue",
    "Insurance settlement revenue",
    "Cash",
    "Rents",
    "Salaries",
    "Pharmaceutical purchases",
    "Accounts payable",
    "Out-of-pocket fees revenue",
    "Petty cash",
    "Savings deposits",
    "Time deposits",
    "Prepaid expenses",
    "Advance payments",
    "Suspense payments",
    "Medical supplies inventory",
    "Pharmaceuticals inventory",
    "Supplies inventory",
    "Medical equipment",
    "Vehicles",
    "Furniture and fixtures",
    "Buildings",
    "Building improvements",
    "Land",
    "Leasehold deposits",
    "Guarantee deposits",
    "Software",
    "Long-term prepaid expenses",
    "Accumulated depreciation",
    "Notes payable",
    "Accrued expenses",
    "Accrued bonuses",
    "Deposits received",
    "Withholding tax payable",
    "Social insurance payable",
    "Consumption tax payable",
    "Short-term borrowings",
    "Long-term borrowings",
    "Lease obligations",
    "Retained earnings",
    "Owner capital",
    "Health checkup revenue",
    "Vaccination revenue",
    "Document fees revenue",
    "Miscellaneous revenue",
    "Interest income",
    "Bonuses",
    "Part-time wages",
    "Legal welfare expense",
    "Welfare expense",
    "Retirement benefits",
    "Medical supplies expense",
    "Clinical testing fees",
    "Outsourced laboratory fees",
    "Medical instruments expense",
    "Equipment leases",
    "Utilities expense",
    "Water expense",
    "Communication expense",
    "Travel expense",
    "Vehicle expense",
    "Advertising expense",
    "Conference fees",
    "Training expense",
    "Books and subscriptions",
    "Repairs expense",
    "Consumables expense",
    "Office supplies expense",
    "Taxes and dues",
    "Insurance expense",
    "Depreciation expense",
    "Commission fees",
    "Professional fees",
    "Donations",
    "Entertainment expense",
    "Miscellaneous expense",
    "Interest expense",
    "Uniform expense",
    "Directors compensation",
];

/// Shape of the generated corpus.
#[derive(Clone, Debug)]
pub struct JournalConfig {
    /// Active account vocabulary per side (bounded by the chart size).
    pub accounts_per_side: usize,
    /// Distinct account pairs active in one organization (including the two
    /// fixed insurance flows).
    pub pairs_per_org: usize,
    /// Leading pool pairs shared by every organization.
    pub shared_pairs: usize,
    /// Fraction of pool pairs whose amount is a fixed recurring value.
    pub recurring_fraction: f64,
    /// Lognormal sigma range for non-recurring pair amounts.
    pub sigma_range: (f64, f64),
    /// Log-uniform range of pair median amounts.
    pub median_log_range: (f64, f64),
}

impl Default for JournalConfig {
    fn default() -> Self {
        JournalConfig {
            accounts_per_side: 55,
            pairs_per_org: 46,
            shared_pairs: 24,
            recurring_fraction: 0.25,
            sigma_range: (0.12, 0.35),
            median_log_range: (800.0_f64.ln(), 2_500_000.0_f64.ln()),
        }
    }
}

/// Amount law of one account pair.
#[derive(Clone, Copy, Debug)]
struct PairLaw {
    median: f64,
    sigma: f64,
    recurring: bool,
}

/// The two fixed high-amount insurance flows, always active in every
/// organization: the periodic claims billing and the matching remittance of
/// insurer payments. An insurer pays out most of what was billed (the rest
/// being patient copayments), so the two flows sit at a comparable magnitude
/// and together make up the entire top of a clinic's book — every amount of
/// the next tier down is more than an order of magnitude smaller.
const BILLING_PAIR: (usize, usize) = (1, 3); // Accounts receivable / Insurance settlement revenue
const REMITTANCE_PAIR: (usize, usize) = (0, 1); // Ordinary deposits / Accounts receivable
const BILLING_MEDIAN: f64 = 30_000_000.0;
const REMITTANCE_MEDIAN: f64 = 24_000_000.0;
const BILLING_WEIGHT: f64 = 0.05;
const REMITTANCE_WEIGHT: f64 = 0.05;

/// Deterministic corpus generator over a fixed catalog of account pairs.
pub struct JournalGenerator {
    cfg: JournalConfig,
    seed: u64,
    /// All plausible pairs with their amount laws; organizations activate
    /// subsets of this pool.
    pool: Vec<((usize, usize), PairLaw)>,
}

/// Per-organization view: active pairs with sampling weights.
struct OrgProfile {
    pairs: Vec<usize>,
    cumulative: Vec<f64>,
}

impl JournalGenerator {
    pub fn new(cfg: JournalConfig, seed: u64) -> Result<Self> {
        let n_accounts = cfg.accounts_per_side;
        if n_accounts < 8 || n_accounts > ACCOUNT_CHART.len() {
            return Err(Error::InvalidArgument(format!(
                "accounts_per_side must be in [8, {}]",
                ACCOUNT_CHART.len()
            )));
        }
        if cfg.pairs_per_org < cfg.shared_pairs + 2 {
            return Err(Error::InvalidArgument(
                "pairs_per_org must cover the shared pairs plus the two fixed flows".into(),
            ));
        }

        let mut rng = ChaCha12Rng::seed_from_u64(seeding::derive(seed, &[0]));
        let mut pool: Vec<((usize, usize), PairLaw)> = vec![
            (
                BILLING_PAIR,
                PairLaw { median: BILLING_MEDIAN, sigma: 0.05, recurring: false },
            ),
            (
                REMITTANCE_PAIR,
                PairLaw { median: REMITTANCE_MEDIAN, sigma: 0.06, recurring: false },
            ),
        ];
        let mut seen: Vec<(usize, usize)> = pool.iter().map(|p| p.0).collect();
        for d in 0..n_accounts {
            let partners = 2 + (rng.gen::<f64>() < 0.5) as usize;
            for _ in 0..partners {
                let c = rng.gen_range(0..n_accounts);
                if c == d || seen.contains(&(d, c)) {
                    continue;
                }
                seen.push((d, c));
                let (lo, hi) = cfg.median_log_range;
                let mut median = (lo + rng.gen::<f64>() * (hi - lo)).exp();
                let sigma =
                    cfg.sigma_range.0 + rng.gen::<f64>() * (cfg.sigma_range.1 - cfg.sigma_range.0);
                let recurring = rng.gen::<f64>() < cfg.recurring_fraction;
                if recurring {
                    // Fixed monthly amounts come in round figures.
                    median = (median / 1000.0).ceil().max(1.0) * 1000.0;
                }
                pool.push(((d, c), PairLaw { median, sigma, recurring }));
            }
        }

        let needed = cfg.pairs_per_org;
        if pool.len() < needed {
            return Err(Error::InvalidArgument(format!(
                "only {} plausible pairs available for {} per org",
                pool.len(),
                needed
            )));
        }
        Ok(JournalGenerator { cfg, seed, pool })
    }

    fn profile(&self, org: usize) -> OrgProfile {
        let mut rng = ChaCha12Rng::seed_from_u64(seeding::derive(self.seed, &[1, org as u64]));

        // Fixed flows and the shared core, then an org-specific sample of
        // the remaining pool.
        let mut pairs: Vec<usize> = (0..2 + self.cfg.shared_pairs.min(self.pool.len() - 2)).collect();
        let extra = self.cfg.pairs_per_org - pairs.len();
        let mut rest: Vec<usize> = (pairs.len()..self.pool.len()).collect();
        for i in 0..extra.min(rest.len()) {
            let j = rng.gen_range(i..rest.len());
            rest.swap(i, j);
            pairs.push(rest[i]);
        }

        // Zipf-like weights over an org-specific ordering, so even the
        // shared pairs have different frequencies in different orgs. The two
        // fixed flows keep pinned weights.
        let mut order: Vec<usize> = (2..pairs.len()).collect();
        for i in 0..order.len() {
            let j = rng.gen_range(i..order.len());
            order.swap(i, j);
        }
        let mut weights = vec![0.0; pairs.len()];
        weights[0] = BILLING_WEIGHT;
        weights[1] = REMITTANCE_WEIGHT;
        let zipf_total: f64 = (0..order.len()).map(|r| 1.0 / (r as f64 + 1.0).powf(0.85)).sum();
        let budget = 1.0 - BILLING_WEIGHT - REMITTANCE_WEIGHT;
        for (r, &slot) in order.iter().enumerate() {
            weights[slot] = budget * (1.0 / (r as f64 + 1.0).powf(0.85)) / zipf_total;
        }

        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in &weights {
            acc += w;
            cumulative.push(acc);
        }
        OrgProfile { pairs, cumulative }
    }

    /// Draws `n` entries from the organization's frequency profile.
    pub fn organization_entries(
        &self,
        org: usize,
        n: usize,
        draw_seed: u64,
    ) -> Result<Vec<JournalEntry>> {
        let profile = self.profile(org);
        let mut rng = ChaCha12Rng::seed_from_u64(draw_seed);
        let mut entries = Vec::with_capacity(n);
        for _ in 0..n {
            let u = rng.gen::<f64>() * profile.cumulative.last().copied().unwrap_or(1.0);
            let k = profile
                .cumulative
                .iter()
                .position(|&c| u <= c)
                .unwrap_or(profile.cumulative.len() - 1);
            let ((d, c), law) = self.pool[profile.pairs[k]];
            let amount = if law.recurring {
                law.median
            } else {
                (law.median * (law.sigma * standard_normal(&mut rng)).exp()).ceil().max(1.0)
            };
            entries.push(JournalEntry {
                debit: ACCOUNT_CHART[d].to_string(),
                credit: ACCOUNT_CHART[c].to_string(),
                amount,
            });
        }
        Ok(entries)
    }

    /// Every `(debit, credit)` pair the generator can ever emit.
    pub fn plausible_pairs(&self) -> Vec<(String, String)> {
        self.pool
            .iter()
            .map(|&((d, c), _)| (ACCOUNT_CHART[d].to_string(), ACCOUNT_CHART[c].to_string()))
            .collect()
    }
}

/// Generates per-organization corpora with the default shape.
pub fn gen_journal_corpus(
    orgs: usize,
    entries_per_org: &[usize],
    seed: u64,
) -> Result<Vec<Vec<JournalEntry>>> {
    if orgs == 0 {
        return Err(Error::InvalidArgument("need at least one organization".into()));
    }
    if entries_per_org.len() != orgs {
        return Err(Error::Dimension(format!(
            "{} orgs but {} size entries",
            orgs,
            entries_per_org.len()
        )));
    }
    let generator = JournalGenerator::new(JournalConfig::default(), seed)?;
    entries_per_org
        .iter()
        .enumerate()
        .map(|(i, &n)| generator.organization_entries(i, n, seeding::derive(seed, &[2, i as u64])))
        .collect()
}

/// Fits the shared journal schema: open debit/credit vocabularies plus a
/// min-max amount column on the raw (linear) scale.
///
/// The amount stays linear deliberately. Blown-up amounts are the signature
/// global anomaly here, and a test amount several times the training maximum
/// must land several times past 1.0 in feature space; a log transform would
/// compress that multiple into a sliver of the range and bury it. The cost —
/// mid-scale amounts crowding near zero — is benign for this detector, which
/// keys on account pairs for routine entries and on magnitude only where
/// magnitude is the story.
pub fn fit_schema(train: &[JournalEntry]) -> Result<Schema> {
    for (i, e) in train.iter().enumerate() {
        if !(e.amount > 0.0) || !e.amount.is_finite() {
            return Err(Error::Validation(format!(
                "entry {} has nonpositive amount {}",
                i, e.amount
            )));
        }
    }
    let records: Vec<Record> = train.iter().map(|e| e.to_record()).collect();
    Schema::fit(&records, &[("debit", true), ("credit", true)], &[("amount", Transform::None)])
}

/// Encodes entries with a fitted schema.
pub fn encode_entries(schema: &Schema, entries: &[JournalEntry]) -> Result<Matrix> {
    let records: Vec<Record> = entries.iter().map(|e| e.to_record()).collect();
    schema.encode(&records)
}

/// Counts and parameters of journal anomaly injection.
#[derive(Clone, Debug)]
pub struct JournalAnomalyPlan {
    /// Largest-amount entries blown up by a per-entry factor.
    pub n_global: usize,
    /// Entries whose account pair is replaced with one absent from the data.
    pub n_pair_local: usize,
    /// Recurring-amount entries shifted far off their fixed amount.
    pub n_recurring_local: usize,
    /// Global blow-up factor range.
    pub global_factor: (f64, f64),
    /// An amount counts as recurring when it repeats at least this often.
    pub recurring_min_repeats: usize,
}

impl Default for JournalAnomalyPlan {
    fn default() -> Self {
        JournalAnomalyPlan {
            n_global: 6,
            n_pair_local: 8,
            n_recurring_local: 4,
            global_factor: (3.0, 5.0),
            recurring_min_repeats: 5,
        }
    }
}

/// Injects the default anomaly plan (6 global, 12 local).
pub fn inject_journal_anomalies(
    test: &[JournalEntry],
    seed: u64,
) -> Result<(Vec<JournalEntry>, Vec<Label>)> {
    inject_journal_anomalies_with(test, &JournalAnomalyPlan::default(), seed)
}

/// Injects a custom anomaly plan.
///
/// Globals replace the `n_global` largest amounts, each multiplied by its
/// own factor from `global_factor` (so every anomaly is at least 3x its own
/// pre-injection amount). Pair locals swap in a `(debit, credit)` pair that
/// never occurs in the input while keeping the amount. Recurring locals pick
/// entries whose amount repeats at least `recurring_min_repeats` times and
/// shift it by 0.1x or 10x; if too few recurring rows exist, the shortfall
/// becomes extra pair locals.
pub fn inject_journal_anomalies_with(
    test: &[JournalEntry],
    plan: &JournalAnomalyPlan,
    seed: u64,
) -> Result<(Vec<JournalEntry>, Vec<Label>)> {
    let n = test.len();
    if n < plan.n_global.max(6) {
        return Err(Error::InvalidArgument(format!(
            "need at least {} entries, got {}",
            plan.n_global.max(6),
            n
        )));
    }
    let total = plan.n_global + plan.n_pair_local + plan.n_recurring_local;
    if total > n {
        return Err(Error::InvalidArgument(format!("{} anomalies for {} entries", total, n)));
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut entries = test.to_vec();
    let mut labels = vec![Label::Normal; n];
    let mut used = vec![false; n];

    // Globals: the top-n amounts, each scaled by its own factor. Ceiling
    // keeps the "at least 3x" guarantee under integral rounding.
    let mut by_amount: Vec<usize> = (0..n).collect();
    by_amount.sort_by(|&i, &j| {
        test[j].amount.partial_cmp(&test[i].amount).unwrap().then(i.cmp(&j))
    });
    for &idx in by_amount.iter().take(plan.n_global) {
        let (lo, hi) = plan.global_factor;
        let f = lo + rng.gen::<f64>() * (hi - lo);
        entries[idx].amount = (test[idx].amount * f).ceil();
        labels[idx] = Label::Global;
        used[idx] = true;
    }

    // Recurring locals: rows whose amount repeats often enough.
    let mut amount_counts: BTreeMap<u64, usize> = BTreeMap::new();
    for e in test {
        *amount_counts.entry(e.amount.to_bits()).or_insert(0) += 1;
    }
    let mut recurring_rows: Vec<usize> = (0..n)
        .filter(|&i| {
            !used[i] && amount_counts[&test[i].amount.to_bits()] >= plan.recurring_min_repeats
        })
        .collect();
    let take = plan.n_recurring_local.min(recurring_rows.len());
    for i in 0..take {
        let j = rng.gen_range(i..recurring_rows.len());
        recurring_rows.swap(i, j);
        let idx = recurring_rows[i];
        let f = if rng.gen::<bool>() { 10.0 } else { 0.1 };
        entries[idx].amount = (test[idx].amount * f).ceil().max(1.0);
        labels[idx] = Label::Local;
        used[idx] = true;
    }

    // Pair locals (plus any recurring shortfall): an account pair never seen
    // in the input, amount kept.
    let n_pair = plan.n_pair_local + (plan.n_recurring_local - take);
    let mut debit_vocab: Vec<&str> = test.iter().map(|e| e.debit.as_str()).collect();
    debit_vocab.sort_unstable();
    debit_vocab.dedup();
    let mut credit_vocab: Vec<&str> = test.iter().map(|e| e.credit.as_str()).collect();
    credit_vocab.sort_unstable();
    credit_vocab.dedup();
    let mut seen_pairs: Vec<(&str, &str)> =
        test.iter().map(|e| (e.debit.as_str(), e.credit.as_str())).collect();
    seen_pairs.sort_unstable();
    seen_pairs.dedup();

    let free: Vec<usize> = (0..n).filter(|&i| !used[i]).collect();
    if n_pair > free.len() {
        return Err(Error::InvalidArgument("not enough rows left for pair anomalies".into()));
    }
    let chosen = sample_distinct(&mut rng, free.len(), n_pair)?;
    for &slot in &chosen {
        let idx = free[slot];
        let mut found = false;
        for _ in 0..10_000 {
            let d = debit_vocab[rng.gen_range(0..debit_vocab.len())];
            let c = credit_vocab[rng.gen_range(0..credit_vocab.len())];
            if d != c && seen_pairs.binary_search(&(d, c)).is_err() {
                entries[idx].debit = d.to_string();
                entries[idx].credit = c.to_string();
                seen_pairs.insert(seen_pairs.binary_search(&(d, c)).unwrap_err(), (d, c));
                found = true;
                break;
            }
        }
        if !found {
            return Err(Error::InvalidArgument(
                "could not find an unseen account pair to inject".into(),
            ));
        }
        labels[idx] = Label::Local;
    }

    Ok((entries, labels))
}
