//! 5×2 nested cross-validation.
//!
//! The outer loop holds out each of five stratified folds once. Inside each
//! outer training set a stratified 2-fold split tunes the forest
//! hyperparameters by mean validation F1; the winner is refitted on the
//! whole outer training set and scored on the held-out fold. Imputation
//! medians are always learned from the rows a model is trained on.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{f1, precision, recall, Confusion};
use super::roc::{auc, roc_curve, RocPoint};
use super::EvalError;
use crate::features::{apply_imputer, fit_imputer, FeatureMatrix, ImputerState};
use crate::forest::{Forest, HyperParams};
use crate::rng;

pub const OUTER_FOLDS: usize = 5;
pub const INNER_FOLDS: usize = 2;
pub const MIN_ROWS: usize = 10;
pub const MIN_PER_CLASS: usize = 5;
pub const DECISION_THRESHOLD: f64 = 0.5;

/// Stream tags keep fold-plan, inner and refit randomness apart.
const STREAM_OUTER: u64 = 1;
const STREAM_INNER: u64 = 2;
const STREAM_FIT: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    /// Held-out rows per outer fold, ascending.
    pub outer: Vec<Vec<usize>>,
    /// Per outer fold, the two inner validation splits of its training rows.
    pub inner: Vec<[Vec<usize>; INNER_FOLDS]>,
    pub seed: u64,
}

impl FoldPlan {
    /// Training rows of outer fold `k`, ascending.
    pub fn outer_train(&self, k: usize, n_rows: usize) -> Vec<usize> {
        let mut held = vec![false; n_rows];
        self.outer[k].iter().for_each(|&i| held[i] = true);
        (0..n_rows).filter(|&i| !held[i]).collect()
    }
}

/// Deal `rows` into `k` stratified folds: each class is shuffled and dealt
/// round-robin, continuing where the previous class stopped.
fn stratified_split(rows: &[usize], y: &[usize], k: usize, rng: &mut rng::Rng) -> Vec<Vec<usize>> {
    let n_classes = rows.iter().map(|&r| y[r] + 1).max().unwrap_or(0);
    let mut folds = vec![Vec::new(); k];
    let mut slot = 0;
    for c in 0..n_classes {
        let mut members: Vec<usize> = rows.iter().copied().filter(|&r| y[r] == c).collect();
        members.shuffle(rng);
        for r in members {
            folds[slot % k].push(r);
            slot += 1;
        }
    }
    folds.iter_mut().for_each(|f| f.sort_unstable());
    folds
}

pub fn make_fold_plan(y: &[usize], seed: u64) -> Result<FoldPlan, EvalError> {
    if y.len() < MIN_ROWS {
        return Err(EvalError::TooSmall { class: None, count: y.len(), needed: MIN_ROWS });
    }
    for c in [0, 1] {
        let count = y.iter().filter(|&&l| l == c).count();
        if count < MIN_PER_CLASS {
            return Err(EvalError::TooSmall { class: Some(c), count, needed: MIN_PER_CLASS });
        }
    }
    if y.iter().any(|&l| l > 1) {
        return Err(EvalError::NotBinary);
    }
    let all: Vec<usize> = (0..y.len()).collect();
    let outer = stratified_split(&all, y, OUTER_FOLDS, &mut rng::substream(seed, STREAM_OUTER));
    let mut plan = FoldPlan { outer, inner: Vec::new(), seed };
    for k in 0..OUTER_FOLDS {
        let train = plan.outer_train(k, y.len());
        let mut r = rng::substream(rng::derive_seed(seed, &[k as u64]), STREAM_INNER);
        let split = stratified_split(&train, y, INNER_FOLDS, &mut r);
        plan.inner.push([split[0].clone(), split[1].clone()]);
    }
    Ok(plan)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub params: HyperParams,
    /// Validation F1 per inner split; `None` when undefined.
    pub inner_f1: Vec<Option<f64>>,
    /// Mean over inner splits (undefined splits count as 0); `None` if all undefined.
    pub mean_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub test_rows: Vec<usize>,
    pub best_params: HyperParams,
    pub grid: Vec<GridScore>,
    pub imputer: ImputerState,
    pub confusion: Confusion,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub auc: Option<f64>,
    pub roc: Vec<RocPoint<f64>>,
    /// Positive-class probability for each test row, aligned with `test_rows`.
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowPrediction {
    pub row_id: String,
    pub fold: usize,
    pub label: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub seed: u64,
    pub folds: Vec<FoldReport>,
    /// Metrics over the concatenated test predictions.
    pub pooled: Summary,
    pub pooled_confusion: Confusion,
    pub pooled_roc: Vec<RocPoint<f64>>,
    /// Means of the per-fold metrics that are defined.
    pub fold_mean: Summary,
    /// One entry per input row, in row order.
    pub predictions: Vec<RowPrediction>,
}

fn summarize(c: &Confusion, roc: Option<&[RocPoint<f64>]>) -> Summary {
    Summary { precision: precision(c).ok(), recall: recall(c).ok(), f1: f1(c).ok(), auc: roc.map(auc) }
}

fn fit_and_score(
    x: &FeatureMatrix,
    y: &[usize],
    train: &[usize],
    test: &[usize],
    params: &HyperParams,
) -> Result<(Vec<f64>, ImputerState), EvalError> {
    let train_m = x.select_rows(train);
    let imputer = fit_imputer(&train_m)?;
    let train_m = apply_imputer(&imputer, &train_m)?;
    let test_m = apply_imputer(&imputer, &x.select_rows(test))?;
    let y_train: Vec<usize> = train.iter().map(|&i| y[i]).collect();
    let forest = Forest::fit(train_m.to_dense::<f64>()?.view(), &y_train, params)?;
    let scores = forest.predict_positive(test_m.to_dense::<f64>()?.view())?;
    Ok((scores, imputer))
}

fn threshold(scores: &[f64]) -> Vec<usize> {
    scores.iter().map(|&s| usize::from(s >= DECISION_THRESHOLD)).collect()
}

/// Ordering for the selection: higher F1, then fewer trees, then shallower.
fn better(a: &GridScore, b: &GridScore) -> bool {
    match (a.mean_f1, b.mean_f1) {
        (Some(_), None) => true,
        (None, _) => false,
        (Some(fa), Some(fb)) => {
            if fa != fb {
                return fa > fb;
            }
            (a.params.n_trees, a.params.max_depth) < (b.params.n_trees, b.params.max_depth)
        }
    }
}

/// Tune, refit and evaluate outer fold `k`. Only the rows of the fold's
/// training set influence the imputer and the selected hyperparameters.
pub fn run_outer_fold(
    x: &FeatureMatrix,
    y: &[usize],
    plan: &FoldPlan,
    k: usize,
    grid: &[HyperParams],
) -> Result<FoldReport, EvalError> {
    if grid.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    let test = &plan.outer[k];
    let train = plan.outer_train(k, y.len());

    let mut scores: Vec<GridScore> = grid
        .iter()
        .map(|p| GridScore { params: *p, inner_f1: Vec::with_capacity(INNER_FOLDS), mean_f1: None })
        .collect();
    for j in 0..INNER_FOLDS {
        let val = &plan.inner[k][j];
        let inner_train = &plan.inner[k][1 - j];
        let y_val: Vec<usize> = val.iter().map(|&i| y[i]).collect();
        let per_point: Vec<Option<f64>> = grid
            .par_iter()
            .enumerate()
            .map(|(g, p)| {
                let params = p.with_seed(rng::derive_seed(plan.seed, &[STREAM_INNER, k as u64, j as u64, g as u64]));
                let (s, _) = fit_and_score(x, y, inner_train, val, &params)?;
                let c = Confusion::from_predictions(&threshold(&s), &y_val)?;
                Ok(f1(&c).ok())
            })
            .collect::<Result<_, EvalError>>()?;
        for (gs, v) in scores.iter_mut().zip(per_point) {
            gs.inner_f1.push(v);
        }
    }
    for gs in &mut scores {
        if gs.inner_f1.iter().any(Option::is_some) {
            gs.mean_f1 = Some(gs.inner_f1.iter().map(|v| v.unwrap_or(0.0)).sum::<f64>() / INNER_FOLDS as f64);
        }
    }
    let best = scores.iter().fold(&scores[0], |b, s| if better(s, b) { s } else { b });
    if best.mean_f1.is_none() {
        log::warn!("outer fold {k}: validation F1 undefined for every grid point");
        return Err(EvalError::FoldFailure { fold: k });
    }
    let best_params = best.params.with_seed(rng::derive_seed(plan.seed, &[STREAM_FIT, k as u64]));

    let (test_scores, imputer) = fit_and_score(x, y, &train, test, &best_params)?;
    let y_test: Vec<usize> = test.iter().map(|&i| y[i]).collect();
    let confusion = Confusion::from_predictions(&threshold(&test_scores), &y_test)?;
    let roc = roc_curve(&test_scores, &y_test).unwrap_or_default();
    let s = summarize(&confusion, (!roc.is_empty()).then_some(roc.as_slice()));
    Ok(FoldReport {
        fold: k,
        test_rows: test.clone(),
        best_params,
        grid: scores,
        imputer,
        confusion,
        precision: s.precision,
        recall: s.recall,
        f1: s.f1,
        auc: s.auc,
        roc,
        scores: test_scores,
    })
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn nested_cv(x: &FeatureMatrix, y: &[usize], grid: &[HyperParams], seed: u64) -> Result<CvReport, EvalError> {
    if x.n_rows() != y.len() {
        return Err(EvalError::LengthMismatch(x.n_rows(), y.len()));
    }
    if grid.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    let plan = make_fold_plan(y, seed)?;
    let folds: Vec<FoldReport> =
        (0..OUTER_FOLDS).into_par_iter().map(|k| run_outer_fold(x, y, &plan, k, grid)).collect::<Result<_, _>>()?;

    let mut row_score = vec![None; y.len()];
    for f in &folds {
        for (&r, &s) in f.test_rows.iter().zip(&f.scores) {
            if row_score[r].replace((f.fold, s)).is_some() {
                return Err(EvalError::Coverage(r));
            }
        }
    }
    let predictions: Vec<RowPrediction> = row_score
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let (fold, score) = v.ok_or(EvalError::Coverage(i))?;
            Ok(RowPrediction { row_id: x.row_ids[i].clone(), fold, label: y[i], score })
        })
        .collect::<Result<_, EvalError>>()?;
    let all_scores: Vec<f64> = predictions.iter().map(|p| p.score).collect();
    let pooled_confusion = Confusion::from_predictions(&threshold(&all_scores), y)?;
    let pooled_roc = roc_curve(&all_scores, y)?;
    let pooled = summarize(&pooled_confusion, Some(&pooled_roc));
    let fold_mean = Summary {
        precision: mean(folds.iter().map(|f| f.precision)),
        recall: mean(folds.iter().map(|f| f.recall)),
        f1: mean(folds.iter().map(|f| f.f1)),
        auc: mean(folds.iter().map(|f| f.auc)),
    };
    Ok(CvReport { seed, folds, pooled, pooled_confusion, pooled_roc, fold_mean, predictions })
}
