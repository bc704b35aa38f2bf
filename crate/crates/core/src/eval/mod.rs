//! Metrics and the leave-one-well-out experimental protocol.

mod cv;
mod metrics;
mod output;
mod select;

pub use cv::{evaluate_cv, lowo_folds, EvaluationReport, Fold, FoldReport, FoldStatus, Metrics, Prediction};
pub use metrics::{
    accuracy_l, confusion, curve, pr_auc, roc_auc, roc_auc_pairwise, ConfusionCounts, CurvePoint, DEFAULT_THRESHOLD,
};
pub use output::{write_curves, write_wells, PR_CSV, ROC_CSV, WELLS_CSV};
pub use select::{
    greedy_select, grid_search, GbdtGrid, GridResult, GridRow, Selection, SelectionStep, EMPTY_SET_ROC_AUC,
    GREEDY_TOLERANCE,
};
