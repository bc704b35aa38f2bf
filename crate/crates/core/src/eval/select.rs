use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::models::{GbdtParams, ModelSpec};

use super::cv::{evaluate_cv, EvaluationReport, Fold};

/// Smallest pooled ROC AUC gain that justifies adding another feature.
pub const GREEDY_TOLERANCE: f64 = 1e-4;

/// Score of the empty feature set: without inputs every ranking is random.
pub const EMPTY_SET_ROC_AUC: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionStep {
    pub feature: String,
    pub roc_auc: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub baseline_roc_auc: f64,
    /// Accepted steps in selection order.
    pub steps: Vec<SelectionStep>,
    /// Best candidate of the step that failed the tolerance, if any.
    pub rejected: Option<SelectionStep>,
}

impl Selection {
    pub fn features(&self) -> Vec<String> {
        self.steps.iter().map(|s| s.feature.clone()).collect()
    }

    pub fn roc_auc(&self) -> f64 {
        self.steps.last().map_or(self.baseline_roc_auc, |s| s.roc_auc)
    }
}

/// Forward selection from the empty set: each step adds the pool column with
/// the best pooled ROC AUC. Ties go to the earlier pool entry.
pub fn greedy_select(x: &FeatureMatrix, pool: &[String], spec: &ModelSpec, folds: &[Fold]) -> Result<Selection> {
    if pool.is_empty() {
        return Err(Error::Config("greedy selection needs a nonempty candidate pool".into()));
    }
    for name in pool {
        if x.column_index(name).is_none() {
            return Err(Error::UnknownFeature(name.clone()));
        }
    }
    let mut selected: Vec<String> = Vec::new();
    let mut current = EMPTY_SET_ROC_AUC;
    let mut steps = Vec::new();
    let mut rejected = None;
    loop {
        let remaining: Vec<&String> = pool.iter().filter(|c| !selected.contains(c)).collect();
        if remaining.is_empty() {
            break;
        }
        let scores: Vec<f64> = remaining
            .par_iter()
            .map(|c| {
                let mut cols = selected.clone();
                cols.push((*c).clone());
                let report = evaluate_cv(&x.select_columns(&cols)?, spec, folds)?;
                Ok(report.pooled.roc_auc.unwrap_or(f64::NEG_INFINITY))
            })
            .collect::<Result<_>>()?;
        let (best, score) = scores
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc });
        let step = SelectionStep {
            feature: remaining[best].clone(),
            roc_auc: score,
            gain: score - current,
        };
        log::info!("greedy: best `{}` roc_auc {:.5} gain {:+.5}", step.feature, score, step.gain);
        if step.gain < GREEDY_TOLERANCE {
            rejected = Some(step);
            break;
        }
        current = score;
        selected.push(step.feature.clone());
        steps.push(step);
    }
    Ok(Selection {
        baseline_roc_auc: EMPTY_SET_ROC_AUC,
        steps,
        rejected,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub spec: ModelSpec,
    pub roc_auc: Option<f64>,
    pub pr_auc: Option<f64>,
    pub accuracy_l: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: usize,
    pub table: Vec<GridRow>,
}

impl GridResult {
    pub fn best_spec(&self) -> &ModelSpec {
        &self.table[self.best].spec
    }
}

fn size_key(spec: &ModelSpec) -> (usize, usize) {
    match spec {
        ModelSpec::Gbdt(p) => (p.n_trees, p.max_depth),
        _ => (0, 0),
    }
}

/// Evaluate every grid point and pick the best pooled ROC AUC. Ties go to
/// fewer trees, then smaller depth, then the earlier point.
pub fn grid_search(x: &FeatureMatrix, grid: &[ModelSpec], folds: &[Fold]) -> Result<GridResult> {
    if grid.is_empty() {
        return Err(Error::Config("empty parameter grid".into()));
    }
    let reports: Vec<EvaluationReport> = grid
        .par_iter()
        .map(|spec| evaluate_cv(x, spec, folds))
        .collect::<Result<_>>()?;
    let table: Vec<GridRow> = grid
        .iter()
        .zip(&reports)
        .map(|(spec, r)| GridRow {
            spec: spec.clone(),
            roc_auc: r.pooled.roc_auc,
            pr_auc: r.pooled.pr_auc,
            accuracy_l: r.pooled.accuracy_l,
        })
        .collect();
    let mut best = 0;
    for i in 1..table.len() {
        let (a, b) = (
            table[i].roc_auc.unwrap_or(f64::NEG_INFINITY),
            table[best].roc_auc.unwrap_or(f64::NEG_INFINITY),
        );
        if a > b || (a == b && size_key(&table[i].spec) < size_key(&table[best].spec)) {
            best = i;
        }
    }
    Ok(GridResult { best, table })
}

/// Cartesian product of GBDT settings around `base`, in the order
/// learning rate, trees, depth, subspace share, subsample rate.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtGrid {
    pub learning_rate: Vec<f64>,
    pub n_trees: Vec<usize>,
    pub max_depth: Vec<usize>,
    pub subspace_share: Vec<f64>,
    pub subsample_rate: Vec<f64>,
}

impl GbdtGrid {
    pub fn expand(&self, base: &GbdtParams) -> Vec<ModelSpec> {
        fn or<T: Clone>(v: &[T], d: T) -> Vec<T> {
            if v.is_empty() { vec![d] } else { v.to_vec() }
        }
        let mut out = Vec::new();
        for &learning_rate in &or(&self.learning_rate, base.learning_rate) {
            for &n_trees in &or(&self.n_trees, base.n_trees) {
                for &max_depth in &or(&self.max_depth, base.max_depth) {
                    for &subspace_share in &or(&self.subspace_share, base.subspace_share) {
                        for &subsample_rate in &or(&self.subsample_rate, base.subsample_rate) {
                            out.push(ModelSpec::Gbdt(GbdtParams {
                                learning_rate,
                                n_trees,
                                max_depth,
                                subspace_share,
                                subsample_rate,
                                ..base.clone()
                            }));
                        }
                    }
                }
            }
        }
        out
    }
}
