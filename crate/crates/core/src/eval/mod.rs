//! Classification metrics, ROC analysis and nested cross-validation.

mod cv;
mod metrics;
mod roc;

use thiserror::Error;

pub use cv::{
    make_fold_plan, nested_cv, run_outer_fold, CvReport, FoldPlan, FoldReport, GridScore, RowPrediction, Summary,
    DECISION_THRESHOLD, INNER_FOLDS, OUTER_FOLDS,
};
pub use metrics::{baseline_recall, f1, f1_score, precision, recall, BaselineRecall, Confusion, GroupBaseline};
pub use roc::{auc, mann_whitney_auc, roc_curve, RocPoint};

use crate::features::FeatureError;
use crate::forest::ForestError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("{0} is undefined (zero denominator)")]
    UndefinedMetric(&'static str),
    #[error("labels contain a single class")]
    SingleClass,
    #[error("labels must be 0/1")]
    NotBinary,
    #[error("lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("too few rows to stratify (class {class:?}: {count}, need {needed})")]
    TooSmall { class: Option<usize>, count: usize, needed: usize },
    #[error("hyperparameter grid is empty")]
    EmptyGrid,
    #[error("outer fold {fold}: validation F1 undefined for every grid point")]
    FoldFailure { fold: usize },
    #[error("row {0} is not scored exactly once")]
    Coverage(usize),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}
