//! Threshold and ranking metrics. ROC AUC is computed from integer counts so
//! that it agrees exactly with the pairwise (Mann-Whitney) estimator.

use serde::{Deserialize, Serialize};

use crate::domain::{Class, LabeledBins};
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn tpr(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn fpr(&self) -> f64 {
        ratio(self.fp, self.fp + self.tn)
    }

    /// Precision, defined as 1 when nothing is predicted positive.
    pub fn precision(&self) -> f64 {
        if self.tp + self.fp == 0 { 1.0 } else { ratio(self.tp, self.tp + self.fp) }
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 { 0.0 } else { a as f64 / b as f64 }
}

/// Counts with `score >= threshold` predicted as class 1.
pub fn confusion(y: &[Class], scores: &[f64], threshold: f64) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for (&y, &s) in y.iter().zip(scores) {
        match (y == 1, s >= threshold) {
            (true, true) => c.tp += 1,
            (true, false) => c.fn_ += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
        }
    }
    c
}

/// Length-weighted share of correctly classified intervals.
pub fn accuracy_l(bins: &LabeledBins, threshold: f64) -> Result<f64> {
    if bins.is_empty() {
        return Err(Error::Empty);
    }
    let mut correct = 0.0;
    let mut total = 0.0;
    for ((&l, &y), &s) in bins.lengths().iter().zip(bins.y()).zip(bins.scores()) {
        total += l;
        if (s >= threshold) == (y == 1) {
            correct += l;
        }
    }
    Ok(correct / total)
}

/// One sweep step: everything scoring at or above `threshold` is positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Score groups in descending order: `(score, positives, negatives)`.
fn tie_groups(y: &[Class], scores: &[f64]) -> Result<Vec<(f64, u64, u64)>> {
    if y.len() != scores.len() {
        return Err(Error::Config("labels and scores differ in length".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Config("scores contain NaN".into()));
    }
    let mut idx: Vec<usize> = (0..y.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut groups: Vec<(f64, u64, u64)> = Vec::new();
    for i in idx {
        let s = scores[i];
        let (pos, neg) = (u64::from(y[i] == 1), u64::from(y[i] != 1));
        match groups.last_mut() {
            // `==` so that 0.0 and -0.0 share a group.
            Some(g) if g.0 == s => {
                g.1 += pos;
                g.2 += neg;
            }
            _ => groups.push((s, pos, neg)),
        }
    }
    Ok(groups)
}

fn class_counts(y: &[Class]) -> (u64, u64) {
    let p = y.iter().filter(|&&v| v == 1).count() as u64;
    (p, y.len() as u64 - p)
}

/// Area under the ROC curve by the trapezoid rule over tie groups.
pub fn roc_auc(y: &[Class], scores: &[f64]) -> Result<f64> {
    let (p, n) = class_counts(y);
    if p == 0 || n == 0 {
        return Err(Error::MissingClass);
    }
    // Twice the area in units of 1/(p*n): each group adds a trapezoid of
    // width `neg` and heights `tp` and `tp + pos`.
    let mut twice: u128 = 0;
    let mut tp: u128 = 0;
    for (_, pos, neg) in tie_groups(y, scores)? {
        twice += u128::from(neg) * (2 * tp + u128::from(pos));
        tp += u128::from(pos);
    }
    Ok(twice as f64 / (2 * u128::from(p) * u128::from(n)) as f64)
}

/// Pairwise estimate: share of (positive, negative) pairs ordered correctly,
/// ties counted as one half. Quadratic; a reference for [`roc_auc`].
pub fn roc_auc_pairwise(y: &[Class], scores: &[f64]) -> Result<f64> {
    let (p, n) = class_counts(y);
    if p == 0 || n == 0 {
        return Err(Error::MissingClass);
    }
    let mut twice: u128 = 0;
    for (i, &yi) in y.iter().enumerate() {
        if yi != 1 {
            continue;
        }
        for (j, &yj) in y.iter().enumerate() {
            if yj == 1 {
                continue;
            }
            if scores[i] > scores[j] {
                twice += 2;
            } else if scores[i] == scores[j] {
                twice += 1;
            }
        }
    }
    Ok(twice as f64 / (2 * u128::from(p) * u128::from(n)) as f64)
}

/// Average precision: sum over descending score groups of the recall gain
/// times the precision reached after the group.
pub fn pr_auc(y: &[Class], scores: &[f64]) -> Result<f64> {
    let (p, _) = class_counts(y);
    if p == 0 {
        return Err(Error::MissingClass);
    }
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut area = 0.0;
    for (_, pos, neg) in tie_groups(y, scores)? {
        tp += pos;
        fp += neg;
        if pos > 0 {
            area += (pos as f64 / p as f64) * (tp as f64 / (tp + fp) as f64);
        }
    }
    Ok(area)
}

/// Operating points from the strictest threshold (`+inf`, nothing positive)
/// down to the lowest score.
pub fn curve(y: &[Class], scores: &[f64]) -> Result<Vec<CurvePoint>> {
    let (p, n) = class_counts(y);
    let mut c = ConfusionCounts {
        tn: n,
        fn_: p,
        ..ConfusionCounts::default()
    };
    let point = |t: f64, c: &ConfusionCounts| CurvePoint {
        threshold: t,
        tpr: c.tpr(),
        fpr: c.fpr(),
        precision: c.precision(),
        recall: c.tpr(),
    };
    let mut out = vec![point(f64::INFINITY, &c)];
    for (s, pos, neg) in tie_groups(y, scores)? {
        c.tp += pos;
        c.fn_ -= pos;
        c.fp += neg;
        c.tn -= neg;
        out.push(point(s, &c));
    }
    Ok(out)
}
