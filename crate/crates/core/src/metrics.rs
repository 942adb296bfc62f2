//! Binary classification metrics.
//!
//! Everything is computed from hard counts or raw scores; metrics whose
//! defining ratio has a zero denominator are reported as `None` and
//! serialized as the literal `undefined` instead of being silently zeroed.

use std::fmt;

use crate::error::{Error, Result};

/// The four cells of a binary confusion matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub true_negative: usize,
    pub false_positive: usize,
    pub false_negative: usize,
    pub true_positive: usize,
}

impl ConfusionCounts {
    /// Tallies predictions against ground truth.
    pub fn from_predictions(predictions: &[u8], truth: &[u8]) -> Result<ConfusionCounts> {
        if predictions.len() != truth.len() {
            return Err(Error::Shape {
                op: "confusion",
                lhs: format!("{} predictions", predictions.len()),
                rhs: format!("{} labels", truth.len()),
            });
        }
        if predictions.is_empty() {
            return Err(Error::Input(
                "confusion counts need at least one sample".to_string(),
            ));
        }
        let mut counts = ConfusionCounts {
            true_negative: 0,
            false_positive: 0,
            false_negative: 0,
            true_positive: 0,
        };
        for (&p, &t) in predictions.iter().zip(truth) {
            match (t, p) {
                (0, 0) => counts.true_negative += 1,
                (0, 1) => counts.false_positive += 1,
                (1, 0) => counts.false_negative += 1,
                (1, 1) => counts.true_positive += 1,
                _ => {
                    return Err(Error::Input(format!(
                        "labels and predictions must be 0 or 1, found ({t}, {p})"
                    )))
                }
            }
        }
        Ok(counts)
    }

    pub fn total(&self) -> usize {
        self.true_negative + self.false_positive + self.false_negative + self.true_positive
    }

    /// Fraction of correct predictions.
    ///
    /// # Panics
    /// Panics on an all-zero count table.
    pub fn accuracy(&self) -> f64 {
        let n = self.total();
        assert!(n > 0, "accuracy of an empty confusion table");
        (self.true_negative + self.true_positive) as f64 / n as f64
    }

    /// True-positive rate `tp / (tp + fn)`; `None` without actual positives.
    pub fn sensitivity(&self) -> Option<f64> {
        let denom = self.true_positive + self.false_negative;
        (denom > 0).then(|| self.true_positive as f64 / denom as f64)
    }

    /// Synonym for [`ConfusionCounts::sensitivity`].
    pub fn recall(&self) -> Option<f64> {
        self.sensitivity()
    }

    /// True-negative rate `tn / (tn + fp)`; `None` without actual negatives.
    pub fn specificity(&self) -> Option<f64> {
        let denom = self.true_negative + self.false_positive;
        (denom > 0).then(|| self.true_negative as f64 / denom as f64)
    }

    /// Positive predictive value `tp / (tp + fp)`; `None` without positive
    /// predictions.
    pub fn precision(&self) -> Option<f64> {
        let denom = self.true_positive + self.false_positive;
        (denom > 0).then(|| self.true_positive as f64 / denom as f64)
    }

    /// Harmonic mean of precision and recall; `None` when either is
    /// undefined or when both are zero.
    pub fn f1(&self) -> Option<f64> {
        let p = self.precision()?;
        let r = self.recall()?;
        if p + r == 0.0 {
            return None;
        }
        Some(2.0 * p * r / (p + r))
    }

    /// Cohen's kappa: agreement beyond chance, `(po - pe) / (1 - pe)`.
    ///
    /// The chance agreement `pe` comes from the marginal distributions of
    /// predictions and truth. When `pe` is 1 (both marginals degenerate)
    /// the statistic is undefined.
    pub fn cohen_kappa(&self) -> Option<f64> {
        let n = self.total() as f64;
        if n == 0.0 {
            return None;
        }
        let po = (self.true_negative + self.true_positive) as f64 / n;
        let pred_neg = (self.true_negative + self.false_negative) as f64;
        let pred_pos = (self.false_positive + self.true_positive) as f64;
        let true_neg = (self.true_negative + self.false_positive) as f64;
        let true_pos = (self.false_negative + self.true_positive) as f64;
        let pe = (true_neg * pred_neg + true_pos * pred_pos) / (n * n);
        if pe == 1.0 {
            return None;
        }
        Some((po - pe) / (1.0 - pe))
    }
}

impl fmt::Display for ConfusionCounts {
    /// Two-line layout with actual classes as rows:
    /// `tn fp` over `fn tp`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "                 predicted_notckd  predicted_ckd"
        )?;
        writeln!(
            f,
            "actual_notckd    {:<17} {}",
            self.true_negative, self.false_positive
        )?;
        write!(
            f,
            "actual_ckd       {:<17} {}",
            self.false_negative, self.true_positive
        )
    }
}

/// Thresholds probabilities into hard labels; ties go to the positive class.
pub fn threshold_scores(scores: &[f64], threshold: f64) -> Vec<u8> {
    scores.iter().map(|&s| u8::from(s >= threshold)).collect()
}

/// Area under the ROC curve by the rank statistic: the probability that a
/// random positive outscores a random negative, counting ties as half.
///
/// Returns `Ok(None)` when only one class is present. Scores must be finite;
/// labels must be 0 or 1.
pub fn roc_auc(scores: &[f64], truth: &[u8]) -> Result<Option<f64>> {
    if scores.len() != truth.len() {
        return Err(Error::Shape {
            op: "roc_auc",
            lhs: format!("{} scores", scores.len()),
            rhs: format!("{} labels", truth.len()),
        });
    }
    if scores.is_empty() {
        return Err(Error::Input("roc_auc needs at least one sample".to_string()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Input("scores must be finite".to_string()));
    }
    if truth.iter().any(|&t| t > 1) {
        return Err(Error::Input("labels must be 0 or 1".to_string()));
    }
    let n = scores.len();
    let n_pos = truth.iter().filter(|&&t| t == 1).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Ok(None);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Tied scores share the average of the ranks they occupy, which makes
    // the rank-sum estimator count tied positive/negative pairs as half.
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let average_rank = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            if truth[k] == 1 {
                rank_sum_pos += average_rank;
            }
        }
        i = j;
    }
    let baseline = (n_pos * (n_pos + 1) / 2) as f64;
    Ok(Some(
        (rank_sum_pos - baseline) / (n_pos as f64 * n_neg as f64),
    ))
}

/// The full set of reported metrics. Ratios with empty denominators are
/// `None` and print as `undefined`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricReport {
    pub accuracy: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub cohen_kappa: Option<f64>,
    pub roc_auc: Option<f64>,
}

impl MetricReport {
    pub fn from_counts(counts: &ConfusionCounts, roc_auc: Option<f64>) -> MetricReport {
        MetricReport {
            accuracy: counts.accuracy(),
            sensitivity: counts.sensitivity(),
            specificity: counts.specificity(),
            precision: counts.precision(),
            recall: counts.recall(),
            f1: counts.f1(),
            cohen_kappa: counts.cohen_kappa(),
            roc_auc,
        }
    }
}

fn metric_line(f: &mut fmt::Formatter<'_>, name: &str, value: Option<f64>) -> fmt::Result {
    match value {
        Some(v) => writeln!(f, "{name}\t{v}"),
        None => writeln!(f, "{name}\tundefined"),
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        metric_line(f, "accuracy", Some(self.accuracy))?;
        metric_line(f, "sensitivity", self.sensitivity)?;
        metric_line(f, "specificity", self.specificity)?;
        metric_line(f, "precision", self.precision)?;
        metric_line(f, "recall", self.recall)?;
        metric_line(f, "f1", self.f1)?;
        metric_line(f, "cohen_kappa", self.cohen_kappa)?;
        match self.roc_auc {
            Some(v) => write!(f, "roc_auc\t{v}"),
            None => write!(f, "roc_auc\tundefined"),
        }
    }
}

/// Scores a batch end to end: thresholds, tallies, and computes every
/// metric including ROC-AUC from the raw scores.
///
/// Scores must be probabilities in `[0, 1]`; the threshold must lie
/// strictly between 0 and 1.
pub fn full_report(
    scores: &[f64],
    threshold: f64,
    truth: &[u8],
) -> Result<(ConfusionCounts, MetricReport)> {
    if !threshold.is_finite() || !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Config(format!(
            "threshold must lie strictly between 0 and 1, got {threshold}"
        )));
    }
    if let Some(bad) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::Input(format!(
            "scores must be probabilities in [0, 1], found {bad}"
        )));
    }
    let predictions = threshold_scores(scores, threshold);
    let counts = ConfusionCounts::from_predictions(&predictions, truth)?;
    let auc = roc_auc(scores, truth)?;
    Ok((counts, MetricReport::from_counts(&counts, auc)))
}
