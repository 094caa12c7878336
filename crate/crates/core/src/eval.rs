//! Precision-recall evaluation of anomaly scores.
//!
//! Scores are swept from the highest threshold down, one precision-recall
//! point per distinct score (ties grouped), and average precision is the
//! area under that sweep: `AP = sum (R_n - R_{n-1}) * P_n`. Besides the
//! overall figure, detection quality is decomposed per anomaly type:
//! `ap_global` is computed over normals and global anomalies only and
//! `ap_local` over normals and local anomalies only, so neither type's
//! ranking contaminates the other's figure (a toggle keeps the other type
//! in the pool as a negative instead). Repeated runs aggregate to a
//! per-component mean and sample (n-1) standard deviation.

use crate::dataset::Label;
use crate::error::{Error, Result};

/// Per-sample anomaly scores paired with ground-truth labels.
#[derive(Clone, Debug)]
pub struct ScoredSet {
    scores: Vec<f64>,
    labels: Vec<Label>,
}

impl ScoredSet {
    pub fn new(scores: Vec<f64>, labels: Vec<Label>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::Dimension(format!(
                "{} scores vs {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
            return Err(Error::Validation(format!("score {} is not finite", i)));
        }
        Ok(ScoredSet { scores, labels })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Overall and per-type average precision for one run. A component is
/// absent when its anomaly type does not occur in the test set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ApTriple {
    pub ap_all: f64,
    pub ap_global: Option<f64>,
    pub ap_local: Option<f64>,
}

/// One precision-recall point per distinct score, highest threshold first.
///
/// Points are `(recall, precision)`; recall is non-decreasing along the
/// sweep and ends at 1.
pub fn pr_curve(scores: &[f64], positive: &[bool]) -> Result<Vec<(f64, f64)>> {
    if scores.len() != positive.len() {
        return Err(Error::Dimension(format!(
            "{} scores vs {} labels",
            scores.len(),
            positive.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::Validation(format!("score {} is not finite", i)));
    }
    let total_pos = positive.iter().filter(|&&p| p).count();
    let total_neg = positive.len() - total_pos;
    if total_pos == 0 {
        return Err(Error::UndefinedMetric(
            "average precision needs at least one positive sample".into(),
        ));
    }
    if total_neg == 0 {
        return Err(Error::UndefinedMetric(
            "average precision needs at least one negative sample".into(),
        ));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("scores are finite"));

    let mut points = Vec::new();
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < order.len() {
        // Every sample tied at this score crosses the threshold together.
        let here = scores[order[i]];
        while i < order.len() && scores[order[i]] == here {
            if positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let recall = tp as f64 / total_pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        points.push((recall, precision));
    }
    Ok(points)
}

/// Area under the descending-threshold precision-recall sweep.
pub fn average_precision(scores: &[f64], positive: &[bool]) -> Result<f64> {
    let points = pr_curve(scores, positive)?;
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (recall, precision) in points {
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(ap)
}

/// Overall plus per-type average precision, excluding the other anomaly
/// type from each per-type pool.
pub fn ap_triple(scored: &ScoredSet) -> Result<ApTriple> {
    ap_triple_with(scored, true)
}

/// As [`ap_triple`], with the subset policy explicit: when `exclude_other`
/// is false the other anomaly type stays in the per-type pool as a
/// negative instead of being dropped.
pub fn ap_triple_with(scored: &ScoredSet, exclude_other: bool) -> Result<ApTriple> {
    let any: Vec<bool> = scored.labels.iter().map(|&l| l != Label::Normal).collect();
    let ap_all = average_precision(&scored.scores, &any)?;

    let per_type = |target: Label, other: Label| -> Result<Option<f64>> {
        if !scored.labels.contains(&target) {
            return Ok(None);
        }
        let mut scores = Vec::new();
        let mut positive = Vec::new();
        for (&s, &l) in scored.scores.iter().zip(&scored.labels) {
            if exclude_other && l == other {
                continue;
            }
            scores.push(s);
            positive.push(l == target);
        }
        average_precision(&scores, &positive).map(Some)
    };

    Ok(ApTriple {
        ap_all,
        ap_global: per_type(Label::Global, Label::Local)?,
        ap_local: per_type(Label::Local, Label::Global)?,
    })
}

/// Mean and sample standard deviation of one triple component.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ApStats {
    pub mean: f64,
    pub std: f64,
    /// Number of runs the component was present in.
    pub n: usize,
}

/// Per-component aggregates over repeated runs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ApSummary {
    pub all: ApStats,
    pub global: Option<ApStats>,
    pub local: Option<ApStats>,
}

fn stats(values: &[f64]) -> ApStats {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n < 2 {
        0.0
    } else {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n - 1) as f64).sqrt()
    };
    ApStats { mean, std, n }
}

/// Aggregates repeated runs component-wise; a per-type component is
/// summarized over the runs where it is present and absent if it never is.
pub fn aggregate_runs(triples: &[ApTriple]) -> Result<ApSummary> {
    if triples.is_empty() {
        return Err(Error::InvalidArgument("no runs to aggregate".into()));
    }
    let all: Vec<f64> = triples.iter().map(|t| t.ap_all).collect();
    let global: Vec<f64> = triples.iter().filter_map(|t| t.ap_global).collect();
    let local: Vec<f64> = triples.iter().filter_map(|t| t.ap_local).collect();
    Ok(ApSummary {
        all: stats(&all),
        global: if global.is_empty() { None } else { Some(stats(&global)) },
        local: if local.is_empty() { None } else { Some(stats(&local)) },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_enumerated_sweep() {
        let ap = average_precision(&[0.9, 0.8, 0.7], &[true, false, true]).unwrap();
        assert!((ap - 5.0 / 6.0).abs() < 1e-15, "ap = {}", ap);
    }

    #[test]
    fn perfect_separation_scores_one() {
        let scores = [9.0, 8.0, 7.0, 1.0, 0.5, 0.2];
        let positive = [true, true, true, false, false, false];
        assert_eq!(average_precision(&scores, &positive).unwrap(), 1.0);
    }

    #[test]
    fn identical_scores_give_base_rate() {
        let scores = [0.5; 8];
        let positive = [true, true, true, false, false, false, false, false];
        assert_eq!(average_precision(&scores, &positive).unwrap(), 3.0 / 8.0);
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        assert!(matches!(
            average_precision(&[1.0, 2.0], &[false, false]),
            Err(Error::UndefinedMetric(_))
        ));
        assert!(matches!(
            average_precision(&[1.0, 2.0], &[true, true]),
            Err(Error::UndefinedMetric(_))
        ));
        assert!(matches!(
            average_precision(&[f64::NAN, 2.0], &[true, false]),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            average_precision(&[1.0], &[true, false]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn monotone_transforms_and_permutations_preserve_ap() {
        let scores = vec![3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0];
        let positive = vec![false, false, true, false, true, true, false, false];
        let base = average_precision(&scores, &positive).unwrap();

        let exp: Vec<f64> = scores.iter().map(|s| s.exp()).collect();
        assert_eq!(average_precision(&exp, &positive).unwrap(), base);

        let affine: Vec<f64> = scores.iter().map(|s| 0.25 * s - 7.0).collect();
        assert_eq!(average_precision(&affine, &positive).unwrap(), base);

        let perm = [5, 2, 7, 0, 3, 6, 1, 4];
        let p_scores: Vec<f64> = perm.iter().map(|&i| scores[i]).collect();
        let p_positive: Vec<bool> = perm.iter().map(|&i| positive[i]).collect();
        assert_eq!(average_precision(&p_scores, &p_positive).unwrap(), base);
    }

    #[test]
    fn per_type_pools_exclude_the_other_type() {
        // Locals outrank globals; with exclusion the global component is
        // perfect, and counting locals as negatives must drag it down.
        let scores = vec![10.0, 9.0, 8.0, 7.0, 1.0, 0.5];
        let labels = vec![
            Label::Local,
            Label::Local,
            Label::Global,
            Label::Global,
            Label::Normal,
            Label::Normal,
        ];
        let scored = ScoredSet::new(scores, labels).unwrap();
        let excl = ap_triple(&scored).unwrap();
        assert_eq!(excl.ap_global, Some(1.0));
        assert_eq!(excl.ap_local, Some(1.0));
        assert_eq!(excl.ap_all, 1.0);

        let incl = ap_triple_with(&scored, false).unwrap();
        assert!(incl.ap_global.unwrap() < 1.0);
        assert_eq!(incl.ap_local, Some(1.0));
    }

    #[test]
    fn missing_type_reports_absent_component() {
        let scores = vec![5.0, 4.0, 1.0, 0.5];
        let labels = vec![Label::Global, Label::Global, Label::Normal, Label::Normal];
        let scored = ScoredSet::new(scores, labels).unwrap();
        let triple = ap_triple(&scored).unwrap();
        assert_eq!(triple.ap_local, None);
        assert_eq!(triple.ap_global, Some(triple.ap_all));
    }

    #[test]
    fn scored_set_validates() {
        assert!(ScoredSet::new(vec![1.0], vec![]).is_err());
        assert!(ScoredSet::new(vec![f64::INFINITY], vec![Label::Normal]).is_err());
    }

    #[test]
    fn aggregation_matches_hand_statistics() {
        let t = |a: f64| ApTriple { ap_all: a, ap_global: Some(a), ap_local: None };
        let summary = aggregate_runs(&[t(0.4), t(0.6)]).unwrap();
        assert_eq!(summary.all.mean, 0.5);
        // Sample std of {0.4, 0.6}: sqrt(2 * 0.01 / 1).
        assert!((summary.all.std - 0.02f64.sqrt()).abs() < 1e-15);
        assert_eq!(summary.local, None);

        let identical = vec![t(0.875); 10];
        let s = aggregate_runs(&identical).unwrap();
        assert_eq!(s.all.mean, 0.875);
        assert_eq!(s.all.std, 0.0);

        let single = aggregate_runs(&[t(0.3)]).unwrap();
        assert_eq!(single.all.std, 0.0);
        assert_eq!(single.all.n, 1);

        assert!(matches!(aggregate_runs(&[]), Err(Error::InvalidArgument(_))));
    }
}
