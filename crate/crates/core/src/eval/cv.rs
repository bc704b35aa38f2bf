use std::collections::BTreeSet;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Class, LabeledBins};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::models::{fit, ModelSpec};

use super::metrics::{accuracy_l, curve, pr_auc, roc_auc, CurvePoint, DEFAULT_THRESHOLD};

/// One leave-one-well-out split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<String>,
    pub test: String,
}

/// One fold per distinct well, in sorted well order. All laterals of a well
/// share its fold.
pub fn lowo_folds(x: &FeatureMatrix) -> Result<Vec<Fold>> {
    let wells: Vec<String> = x.wells().iter().map(|w| w.to_string()).collect();
    if wells.len() < 2 {
        return Err(Error::TooFewWells(wells.len()));
    }
    Ok(wells
        .iter()
        .map(|test| Fold {
            train: wells.iter().filter(|w| *w != test).cloned().collect(),
            test: test.clone(),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldStatus {
    Ok,
    /// Training wells hold a single class; the fold is left out of pooling.
    SingleClassTrain,
    /// No rows for the test well.
    EmptyTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub test_well: String,
    pub status: FoldStatus,
    pub n_train: usize,
    pub n_test: usize,
    /// Length share of class 1 in the test well.
    pub shale_share: f64,
    /// Absent when the test well holds a single class.
    pub roc_auc: Option<f64>,
    pub pr_auc: Option<f64>,
    pub accuracy_l: Option<f64>,
    /// Accuracy L of always predicting the training majority class.
    pub accuracy_l_majority: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub roc_auc: Option<f64>,
    pub pr_auc: Option<f64>,
    pub accuracy_l: Option<f64>,
    pub accuracy_l_majority: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model: ModelSpec,
    pub features: Vec<String>,
    pub n_rows: usize,
    pub shale_share: f64,
    pub folds: Vec<FoldReport>,
    /// Over the concatenated predictions of all pooled folds.
    pub pooled: Metrics,
    /// Unweighted means over folds where the metric is defined.
    pub fold_mean: Metrics,
    #[serde(skip)]
    pub curve: Vec<CurvePoint>,
    /// Test predictions of pooled folds, in fold order.
    #[serde(skip)]
    pub predictions: Vec<Prediction>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub well_id: Arc<str>,
    pub hole_id: Arc<str>,
    pub bin: usize,
    pub class: Class,
    pub score: f64,
    pub majority_score: f64,
}

impl EvaluationReport {
    /// Rows of `well_id,shale_share,accl_model,accl_major,improvement`.
    pub fn well_rows(&self) -> Vec<(String, f64, f64, f64, f64)> {
        self.folds
            .iter()
            .filter_map(|f| {
                let (m, b) = (f.accuracy_l?, f.accuracy_l_majority?);
                Some((f.test_well.clone(), f.shale_share, m, b, m - b))
            })
            .collect()
    }

    /// Number of wells where the model beats the majority baseline.
    pub fn wells_improved(&self) -> usize {
        self.well_rows().iter().filter(|r| r.4 > 0.0).count()
    }
}

struct FoldOutcome {
    report: FoldReport,
    predictions: Vec<Prediction>,
}

/// Leave-one-well-out evaluation. Folds run in parallel; results are merged
/// in fold order, and each fold trains on rows in (well, hole, bin) order, so
/// the report does not depend on the input row order.
pub fn evaluate_cv(x: &FeatureMatrix, spec: &ModelSpec, folds: &[Fold]) -> Result<EvaluationReport> {
    if folds.is_empty() {
        return Err(Error::Config("no folds to evaluate".into()));
    }
    for f in folds {
        if f.train.contains(&f.test) {
            return Err(Error::Config(format!("well `{}` is in its own training set", f.test)));
        }
    }
    let order = x.canonical_order();
    let outcomes: Vec<FoldOutcome> = folds
        .par_iter()
        .map(|fold| run_fold(x, &order, spec, fold))
        .collect::<Result<_>>()?;

    let mut predictions = Vec::new();
    let mut folds_out = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        predictions.extend(o.predictions);
        folds_out.push(o.report);
    }
    let y: Vec<Class> = predictions.iter().map(|p| p.class).collect();
    let scores: Vec<f64> = predictions.iter().map(|p| p.score).collect();
    let majority: Vec<f64> = predictions.iter().map(|p| p.majority_score).collect();
    let pooled = Metrics {
        roc_auc: roc_auc(&y, &scores).ok(),
        pr_auc: pr_auc(&y, &scores).ok(),
        accuracy_l: uniform_accuracy(&y, &scores),
        accuracy_l_majority: uniform_accuracy(&y, &majority),
    };
    let mean = |get: fn(&FoldReport) -> Option<f64>| -> Option<f64> {
        let v: Vec<f64> = folds_out.iter().filter_map(get).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    let fold_mean = Metrics {
        roc_auc: mean(|f| f.roc_auc),
        pr_auc: mean(|f| f.pr_auc),
        accuracy_l: mean(|f| f.accuracy_l),
        accuracy_l_majority: mean(|f| f.accuracy_l_majority),
    };
    Ok(EvaluationReport {
        model: spec.clone(),
        features: x.columns().to_vec(),
        n_rows: x.n_rows(),
        shale_share: x.positive_share(),
        folds: folds_out,
        pooled,
        fold_mean,
        curve: curve(&y, &scores).unwrap_or_default(),
        predictions,
    })
}

fn uniform_accuracy(y: &[Class], scores: &[f64]) -> Option<f64> {
    let bins = LabeledBins::uniform(y.to_vec(), scores.to_vec()).ok()?;
    accuracy_l(&bins, DEFAULT_THRESHOLD).ok()
}

fn run_fold(x: &FeatureMatrix, order: &[usize], spec: &ModelSpec, fold: &Fold) -> Result<FoldOutcome> {
    let train_wells: BTreeSet<&str> = fold.train.iter().map(String::as_str).collect();
    let train_idx: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&r| train_wells.contains(&*x.rows()[r].well_id))
        .collect();
    let test_idx: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&r| *x.rows()[r].well_id == *fold.test)
        .collect();
    let train = x.select_rows(&train_idx);
    let test = x.select_rows(&test_idx);
    let mut report = FoldReport {
        test_well: fold.test.clone(),
        status: FoldStatus::Ok,
        n_train: train.n_rows(),
        n_test: test.n_rows(),
        shale_share: test.positive_share(),
        roc_auc: None,
        pr_auc: None,
        accuracy_l: None,
        accuracy_l_majority: None,
    };
    if test.n_rows() == 0 {
        report.status = FoldStatus::EmptyTest;
        return Ok(FoldOutcome { report, predictions: Vec::new() });
    }
    let model = match fit(&train, spec) {
        Ok(m) => m,
        Err(Error::SingleClass) | Err(Error::Empty) => {
            log::warn!("fold `{}`: training data has a single class; excluded from pooling", fold.test);
            report.status = FoldStatus::SingleClassTrain;
            return Ok(FoldOutcome { report, predictions: Vec::new() });
        }
        Err(e) => return Err(e.in_stage(format!("fold:{}", fold.test))),
    };
    let scores = model.predict_proba(&test)?;
    // Majority baseline as a constant score on the right side of the threshold.
    let majority = if train.positive_share() > 0.5 { 1.0 } else { 0.0 };
    let majority_scores = vec![majority; test.n_rows()];
    let y = test.target();
    report.roc_auc = roc_auc(y, &scores).ok();
    report.pr_auc = pr_auc(y, &scores).ok();
    report.accuracy_l = uniform_accuracy(y, &scores);
    report.accuracy_l_majority = uniform_accuracy(y, &majority_scores);
    let predictions = test
        .rows()
        .iter()
        .zip(y)
        .zip(&scores)
        .map(|((k, &class), &score)| Prediction {
            well_id: k.well_id.clone(),
            hole_id: k.hole_id.clone(),
            bin: k.bin,
            class,
            score,
            majority_score: majority,
        })
        .collect();
    Ok(FoldOutcome { report, predictions })
}
