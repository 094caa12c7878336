//! Result emission: per-cell CSV, aggregated CSV, ranked plain-text table,
//! and a machine-readable failure log.
//!
//! All four artifacts are pure functions of a `RunResult`, and a
//! `RunResult` is a pure function of the configuration, so re-running the
//! same config must reproduce every output byte for byte. Floats are
//! written in shortest round-trip form to keep that property.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::eval::{aggregate_runs, ApStats, ApTriple};
use crate::experiment::{ExperimentRow, RunResult};
use crate::federated::Method;

fn opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Per-cell rows: `method,setting,lambda,ratio,rep,ap_all,ap_global,ap_local`.
pub fn results_csv(result: &RunResult) -> String {
    let mut out = String::from("method,setting,lambda,ratio,rep,ap_all,ap_global,ap_local\n");
    for r in &result.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.method.as_str(),
            r.setting.as_str(),
            r.lambda,
            r.ratio,
            r.rep,
            r.triple.ap_all,
            opt_f64(r.triple.ap_global),
            opt_f64(r.triple.ap_local),
        ));
    }
    out
}

/// Parses rows back from a `results_csv` document, for re-aggregating and
/// re-ranking without re-running. Re-read rows carry no ledger or timing.
pub fn parse_results_csv(text: &str) -> crate::error::Result<Vec<ExperimentRow>> {
    use crate::error::Error;
    use crate::partition::PartitionMode;

    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != "method,setting,lambda,ratio,rep,ap_all,ap_global,ap_local" {
        return Err(Error::Schema(format!("unexpected results header {:?}", header)));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = (i + 2) as u64;
        let err = |msg: String| Error::Parse { line: line_no, msg };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(err(format!("{} fields, expected 8", fields.len())));
        }
        let method =
            Method::parse(fields[0]).ok_or_else(|| err(format!("unknown method {:?}", fields[0])))?;
        let setting = PartitionMode::parse(fields[1])
            .ok_or_else(|| err(format!("unknown setting {:?}", fields[1])))?;
        let lambda =
            fields[2].parse().map_err(|_| err(format!("bad lambda {:?}", fields[2])))?;
        let ratio: f64 =
            fields[3].parse().map_err(|_| err(format!("bad ratio {:?}", fields[3])))?;
        let rep = fields[4].parse().map_err(|_| err(format!("bad rep {:?}", fields[4])))?;
        let ap = |s: &str, name: &str| -> crate::error::Result<f64> {
            s.parse().map_err(|_| err(format!("bad {} {:?}", name, s)))
        };
        let opt = |s: &str, name: &str| -> crate::error::Result<Option<f64>> {
            if s.is_empty() { Ok(None) } else { ap(s, name).map(Some) }
        };
        rows.push(ExperimentRow {
            method,
            setting,
            lambda,
            ratio,
            rep,
            triple: ApTriple {
                ap_all: ap(fields[5], "ap_all")?,
                ap_global: opt(fields[6], "ap_global")?,
                ap_local: opt(fields[7], "ap_local")?,
            },
            uploads: None,
            downloads: None,
            train_ms: 0,
            score_ms: 0,
        });
    }
    Ok(rows)
}

/// Rows grouped for aggregation, preserving the sorted row order.
fn grouped(result: &RunResult) -> BTreeMap<(u8, usize, u64), Vec<&ExperimentRow>> {
    let mut groups: BTreeMap<(u8, usize, u64), Vec<&ExperimentRow>> = BTreeMap::new();
    for r in &result.rows {
        let code = match r.method {
            Method::Ia => 1u8,
            Method::Ca => 2,
            Method::FedAvg => 3,
            Method::FedProx => 4,
            Method::Dc => 5,
        };
        groups.entry((code, r.lambda, r.ratio.to_bits())).or_default().push(r);
    }
    groups
}

fn stats_cols(stats: Option<ApStats>) -> String {
    match stats {
        Some(s) => format!("{},{}", s.mean, s.std),
        None => ",".to_string(),
    }
}

/// Mean/std per (method, lambda, ratio) cell, with communication totals.
pub fn aggregated_csv(result: &RunResult) -> String {
    let mut out = String::from(
        "method,setting,lambda,ratio,n,ap_all_mean,ap_all_std,ap_global_mean,ap_global_std,ap_local_mean,ap_local_std,uploads,downloads\n",
    );
    for rows in grouped(result).values() {
        let first = rows[0];
        let triples: Vec<ApTriple> = rows.iter().map(|r| r.triple).collect();
        let summary = aggregate_runs(&triples).expect("group is non-empty");
        // Ledger totals stay empty unless every row in the group has one.
        let sum_opt = |field: fn(&ExperimentRow) -> Option<u64>| -> String {
            rows.iter()
                .map(|r| field(r))
                .sum::<Option<u64>>()
                .map(|v| v.to_string())
                .unwrap_or_default()
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            first.method.as_str(),
            first.setting.as_str(),
            first.lambda,
            first.ratio,
            rows.len(),
            format!("{},{}", summary.all.mean, summary.all.std),
            stats_cols(summary.global),
            stats_cols(summary.local),
            sum_opt(|r| r.uploads),
            sum_opt(|r| r.downloads),
        ));
    }
    out
}

fn fmt_cell(stats: Option<ApStats>) -> String {
    match stats {
        Some(s) => format!("{:.3} ({:.3})", s.mean, s.std),
        None => "-".to_string(),
    }
}

/// Best and second-best method per AP column, excluding pooled training
/// (which sees raw data no federated setting could).
fn ranks(per_method: &[(Method, f64)]) -> (Option<Method>, Option<Method>) {
    let mut ranked: Vec<&(Method, f64)> =
        per_method.iter().filter(|(m, _)| *m != Method::Ca).collect();
    if ranked.len() < 2 {
        return (None, None);
    }
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("means are finite"));
    (Some(ranked[0].0), Some(ranked[1].0))
}

/// Human-readable tables, one block per (lambda, ratio), with best and
/// second-best marks per column among the non-pooled methods.
pub fn report_text(result: &RunResult) -> String {
    let mut out = String::new();
    out.push_str("# Experiment report\n");
    out.push_str(&format!("# config: {}\n", result.fingerprint));
    out.push_str(&format!(
        "# {} rows, {} failures, prepared in {} ms, total {} ms\n",
        result.rows.len(),
        result.failures.len(),
        result.prep_ms,
        result.total_ms
    ));

    // Regroup cells into (lambda, ratio) blocks of per-method summaries.
    let mut blocks: BTreeMap<(usize, u64), Vec<(Method, [Option<ApStats>; 3])>> = BTreeMap::new();
    for rows in grouped(result).values() {
        let first = rows[0];
        let triples: Vec<ApTriple> = rows.iter().map(|r| r.triple).collect();
        let summary = aggregate_runs(&triples).expect("group is non-empty");
        blocks
            .entry((first.lambda, first.ratio.to_bits()))
            .or_default()
            .push((first.method, [Some(summary.all), summary.global, summary.local]));
    }

    const COLS: [&str; 3] = ["ap_all", "ap_global", "ap_local"];
    for ((lambda, ratio_bits), methods) in &blocks {
        let ratio = f64::from_bits(*ratio_bits);
        out.push_str(&format!("\n## lambda = {}, anomaly ratio = {}\n", lambda, ratio));
        out.push_str(&format!(
            "{:<10} {:>15} {:>15} {:>15}  {}\n",
            "method", COLS[0], COLS[1], COLS[2], "rank"
        ));

        // Per column, best/second-best over the non-pooled methods.
        let mut col_ranks = Vec::new();
        for c in 0..3 {
            let per_method: Vec<(Method, f64)> = methods
                .iter()
                .filter_map(|(m, stats)| stats[c].map(|s| (*m, s.mean)))
                .collect();
            col_ranks.push(ranks(&per_method));
        }

        for (method, stats) in methods {
            let mut marks = Vec::new();
            for (c, col) in COLS.iter().enumerate() {
                let (best, second) = col_ranks[c];
                if best == Some(*method) {
                    marks.push(format!("best {}", col));
                } else if second == Some(*method) {
                    marks.push(format!("2nd {}", col));
                }
            }
            out.push_str(&format!(
                "{:<10} {:>15} {:>15} {:>15}  {}\n",
                method.as_str(),
                fmt_cell(stats[0]),
                fmt_cell(stats[1]),
                fmt_cell(stats[2]),
                marks.join(", ")
            ));
        }
    }

    if !result.failures.is_empty() {
        out.push_str("\n## failures\n");
        for f in &result.failures {
            out.push_str(&format!(
                "{} lambda={} ratio={} rep={}: {}\n",
                f.method.as_str(),
                f.lambda,
                f.ratio,
                f.rep,
                f.message
            ));
        }
    }
    out
}

/// One JSON object per failed cell.
pub fn failures_jsonl(result: &RunResult) -> String {
    let mut out = String::new();
    for f in &result.failures {
        let line = serde_json::json!({
            "scope": "cell",
            "method": f.method.as_str(),
            "setting": f.setting.as_str(),
            "lambda": f.lambda,
            "ratio": f.ratio,
            "rep": f.rep,
            "error": f.message,
        });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    out
}

/// Writes results.csv, aggregated.csv, report.txt, and errors.jsonl under
/// `out_dir`, returning the paths in that order.
pub fn write_reports(result: &RunResult, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let artifacts = [
        ("results.csv", results_csv(result)),
        ("aggregated.csv", aggregated_csv(result)),
        ("report.txt", report_text(result)),
        ("errors.jsonl", failures_jsonl(result)),
    ];
    let mut paths = Vec::new();
    for (name, content) in artifacts {
        let path = out_dir.join(name);
        std::fs::write(&path, content)?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::CellFailure;
    use crate::partition::PartitionMode;

    fn row(method: Method, rep: usize, all: f64, global: f64, local: f64) -> ExperimentRow {
        ExperimentRow {
            method,
            setting: PartitionMode::Iid,
            lambda: 8,
            ratio: 0.1,
            rep,
            triple: ApTriple { ap_all: all, ap_global: Some(global), ap_local: Some(local) },
            uploads: Some(1),
            downloads: Some(1),
            train_ms: 0,
            score_ms: 0,
        }
    }

    fn fixture() -> RunResult {
        RunResult {
            fingerprint: "test".into(),
            rows: vec![
                row(Method::Ia, 0, 0.40, 0.90, 0.30),
                row(Method::Ia, 1, 0.44, 0.92, 0.34),
                row(Method::Ca, 0, 0.70, 0.99, 0.60),
                row(Method::Ca, 1, 0.72, 0.99, 0.62),
                row(Method::Dc, 0, 0.58, 1.00, 0.50),
                row(Method::Dc, 1, 0.60, 1.00, 0.52),
            ],
            failures: vec![],
            prep_ms: 0,
            total_ms: 0,
        }
    }

    #[test]
    fn results_csv_has_the_fixed_columns() {
        let csv = results_csv(&fixture());
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "method,setting,lambda,ratio,rep,ap_all,ap_global,ap_local"
        );
        assert_eq!(lines.next().unwrap(), "ia,iid,8,0.1,0,0.4,0.9,0.3");
        assert_eq!(csv.lines().count(), 7);
    }

    #[test]
    fn aggregation_orders_and_averages() {
        let csv = aggregated_csv(&fixture());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        let ia: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(&ia[..5], &["ia", "iid", "8", "0.1", "2"]);
        let mean: f64 = ia[5].parse().unwrap();
        assert!((mean - 0.42).abs() < 1e-12, "ap_all mean {}", mean);
        assert!(lines[2].starts_with("ca,"));
        assert!(lines[3].starts_with("dc,"));
    }

    #[test]
    fn report_marks_best_and_second_among_unpooled() {
        let text = report_text(&fixture());
        let dc_line = text.lines().find(|l| l.starts_with("dc")).unwrap();
        assert!(dc_line.contains("best ap_all"), "line: {}", dc_line);
        assert!(dc_line.contains("best ap_global"), "line: {}", dc_line);
        assert!(dc_line.contains("best ap_local"), "line: {}", dc_line);
        let ia_line = text.lines().find(|l| l.starts_with("ia")).unwrap();
        assert!(ia_line.contains("2nd ap_all"), "line: {}", ia_line);
        let ca_line = text.lines().find(|l| l.starts_with("ca")).unwrap();
        assert!(!ca_line.contains("best"), "line: {}", ca_line);
        assert!(!ca_line.contains("2nd"), "line: {}", ca_line);
    }

    #[test]
    fn single_method_gets_no_marks() {
        let solo = RunResult {
            fingerprint: "solo".into(),
            rows: vec![row(Method::Dc, 0, 0.5, 0.9, 0.4)],
            failures: vec![],
            prep_ms: 0,
            total_ms: 0,
        };
        let text = report_text(&solo);
        assert!(!text.contains("best "));
        assert!(!text.contains("2nd "));
    }

    #[test]
    fn failure_log_is_json_lines() {
        let mut result = fixture();
        result.failures.push(CellFailure {
            method: Method::FedAvg,
            setting: PartitionMode::Iid,
            lambda: 8,
            ratio: 0.1,
            rep: 3,
            message: "client 2 diverged during round 1: loss is not finite".into(),
        });
        let log = failures_jsonl(&result);
        assert_eq!(log.lines().count(), 1);
        let parsed: serde_json::Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
        assert_eq!(parsed["method"], "fedavg");
        assert_eq!(parsed["rep"], 3);
        assert!(parsed["error"].as_str().unwrap().contains("diverged"));
    }

    #[test]
    fn results_csv_round_trips_through_the_parser() {
        let original = fixture();
        let csv = results_csv(&original);
        let rows = parse_results_csv(&csv).unwrap();
        assert_eq!(rows.len(), original.rows.len());
        for (a, b) in rows.iter().zip(&original.rows) {
            assert_eq!(a.method, b.method);
            assert_eq!(a.lambda, b.lambda);
            assert_eq!(a.ratio, b.ratio);
            assert_eq!(a.rep, b.rep);
            assert_eq!(a.triple, b.triple);
            assert_eq!(a.uploads, None);
        }
        let rebuilt = RunResult {
            fingerprint: original.fingerprint.clone(),
            rows,
            failures: vec![],
            prep_ms: 0,
            total_ms: 0,
        };
        assert_eq!(results_csv(&rebuilt), csv);
        assert!(parse_results_csv("bogus\n1,2\n").is_err());
    }

    #[test]
    fn writes_all_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let paths = write_reports(&fixture(), dir.path()).unwrap();
        assert_eq!(paths.len(), 4);
        for p in &paths {
            assert!(p.exists(), "{} missing", p.display());
        }
        let csv = std::fs::read_to_string(&paths[0]).unwrap();
        assert_eq!(csv, results_csv(&fixture()));
    }
}
