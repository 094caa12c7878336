//! CSV readers and writers for journal and synthetic datasets.
//!
//! Journal files carry `debit,credit,amount` (plus a `label` column when
//! labeled); synthetic files carry `a,b,c,label`. Floats are written with
//! the shortest representation that round-trips, so a write/read cycle
//! reproduces values bit for bit.

use std::path::Path;

use crate::dataset::journal::JournalEntry;
use crate::dataset::synthetic::SyntheticRow;
use crate::dataset::Label;
use crate::error::{Error, Result};

fn line_of(record: &csv::StringRecord, fallback: u64) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(fallback)
}

fn check_header(actual: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let got: Vec<&str> = actual.iter().map(str::trim).collect();
    if got != expected {
        return Err(Error::Schema(format!(
            "expected header {:?}, got {:?}",
            expected.join(","),
            got.join(",")
        )));
    }
    Ok(())
}

fn parse_amount(s: &str, line: u64) -> Result<f64> {
    let amount: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Parse { line, msg: format!("bad amount {:?}", s) })?;
    if !(amount > 0.0) || !amount.is_finite() {
        return Err(Error::Validation(format!("line {}: amount must be positive, got {}", line, amount)));
    }
    Ok(amount)
}

fn parse_label(s: &str, line: u64) -> Result<Label> {
    Label::parse(s.trim()).ok_or(Error::Parse { line, msg: format!("bad label {:?}", s) })
}

fn field<'a>(record: &'a csv::StringRecord, i: usize, line: u64) -> Result<&'a str> {
    record.get(i).ok_or(Error::Parse { line, msg: format!("missing column {}", i + 1) })
}

/// Reads an unlabeled journal file (`debit,credit,amount`).
pub fn load_journal_csv(path: impl AsRef<Path>) -> Result<Vec<JournalEntry>> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    check_header(reader.headers()?, &["debit", "credit", "amount"])?;
    let mut entries = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let record = row?;
        let line = line_of(&record, i as u64 + 2);
        if record.len() != 3 {
            return Err(Error::Parse { line, msg: format!("expected 3 fields, got {}", record.len()) });
        }
        entries.push(JournalEntry {
            debit: field(&record, 0, line)?.trim().to_string(),
            credit: field(&record, 1, line)?.trim().to_string(),
            amount: parse_amount(field(&record, 2, line)?, line)?,
        });
    }
    Ok(entries)
}

/// Reads a labeled journal file (`debit,credit,amount,label`).
pub fn load_labeled_journal_csv(path: impl AsRef<Path>) -> Result<(Vec<JournalEntry>, Vec<Label>)> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    check_header(reader.headers()?, &["debit", "credit", "amount", "label"])?;
    let mut entries = Vec::new();
    let mut labels = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let record = row?;
        let line = line_of(&record, i as u64 + 2);
        if record.len() != 4 {
            return Err(Error::Parse { line, msg: format!("expected 4 fields, got {}", record.len()) });
        }
        entries.push(JournalEntry {
            debit: field(&record, 0, line)?.trim().to_string(),
            credit: field(&record, 1, line)?.trim().to_string(),
            amount: parse_amount(field(&record, 2, line)?, line)?,
        });
        labels.push(parse_label(field(&record, 3, line)?, line)?);
    }
    Ok((entries, labels))
}

/// Reads a labeled synthetic file (`a,b,c,label`).
pub fn load_labeled_synthetic_csv(path: impl AsRef<Path>) -> Result<(Vec<SyntheticRow>, Vec<Label>)> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    check_header(reader.headers()?, &["a", "b", "c", "label"])?;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let record = row?;
        let line = line_of(&record, i as u64 + 2);
        if record.len() != 4 {
            return Err(Error::Parse { line, msg: format!("expected 4 fields, got {}", record.len()) });
        }
        let cat = |i: usize| -> Result<usize> {
            let s = field(&record, i, line)?.trim();
            let v: usize =
                s.parse().map_err(|_| Error::Parse { line, msg: format!("bad category {:?}", s) })?;
            if v > 2 {
                return Err(Error::Validation(format!("line {}: category {} out of range", line, v)));
            }
            Ok(v)
        };
        let a = cat(0)?;
        let b = cat(1)?;
        let cs = field(&record, 2, line)?.trim();
        let c: f64 =
            cs.parse().map_err(|_| Error::Parse { line, msg: format!("bad value {:?}", cs) })?;
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::Validation(format!("line {}: c must lie in [0, 1], got {}", line, c)));
        }
        rows.push(SyntheticRow { a, b, c });
        labels.push(parse_label(field(&record, 3, line)?, line)?);
    }
    Ok((rows, labels))
}

/// Writes an unlabeled journal file.
pub fn write_journal_csv(path: impl AsRef<Path>, entries: &[JournalEntry]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["debit", "credit", "amount"])?;
    for e in entries {
        writer.write_record([e.debit.as_str(), e.credit.as_str(), &e.amount.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes a labeled journal file.
pub fn write_labeled_journal_csv(
    path: impl AsRef<Path>,
    entries: &[JournalEntry],
    labels: &[Label],
) -> Result<()> {
    if entries.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} entries vs {} labels",
            entries.len(),
            labels.len()
        )));
    }
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["debit", "credit", "amount", "label"])?;
    for (e, l) in entries.iter().zip(labels) {
        writer.write_record([
            e.debit.as_str(),
            e.credit.as_str(),
            &e.amount.to_string(),
            l.as_str(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes a labeled synthetic file.
pub fn write_labeled_synthetic_csv(
    path: impl AsRef<Path>,
    rows: &[SyntheticRow],
    labels: &[Label],
) -> Result<()> {
    if rows.len() != labels.len() {
        return Err(Error::Dimension(format!("{} rows vs {} labels", rows.len(), labels.len())));
    }
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["a", "b", "c", "label"])?;
    for (r, l) in rows.iter().zip(labels) {
        writer.write_record([
            &r.a.to_string(),
            &r.b.to_string(),
            &r.c.to_string(),
            l.as_str(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
