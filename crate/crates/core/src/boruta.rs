//! All-relevant feature selection with shadow features.
//!
//! Every iteration appends a row-permuted copy of each surviving feature,
//! fits a class-weighted forest, and records a hit for each real feature
//! whose importance beats the chosen percentile of the shadow importances.
//! Hit counts are tested against Binomial(iterations, ½) with an exact
//! one-sided test; significant features are confirmed or rejected, and
//! rejected ones leave the pool.

use std::collections::BTreeMap;
use std::fmt;

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureError, FeatureMatrix, RegionFeature};
use crate::forest::{ClassWeighting, Forest, ForestError, HyperParams};
use crate::rng;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BorutaError {
    #[error("invalid boruta config: {0}")]
    InvalidConfig(String),
    #[error("{rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("result has {result} features but the matrix has {matrix}")]
    ColumnMismatch { result: usize, matrix: usize },
    #[error("feature `{0}` is not a regional MRI measure")]
    NotARegion(String),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeCountMode {
    /// `max(128, ⌈10·√(2F)⌉)` for `F` surviving features.
    #[default]
    Auto,
    Fixed(usize),
}

impl TreeCountMode {
    pub fn n_trees(self, n_active: usize) -> usize {
        match self {
            TreeCountMode::Auto => 128.max((10.0 * ((2 * n_active) as f64).sqrt()).ceil() as usize),
            TreeCountMode::Fixed(n) => n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BorutaConfig {
    pub alpha: f64,
    pub percentile: f64,
    pub max_iter: usize,
    pub two_step: bool,
    pub tree_count_mode: TreeCountMode,
    pub max_depth: usize,
    pub class_weighting: ClassWeighting,
    pub seed: u64,
}

impl Default for BorutaConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            percentile: 100.0,
            max_iter: 1000,
            two_step: false,
            tree_count_mode: TreeCountMode::Auto,
            max_depth: 5,
            class_weighting: ClassWeighting::InverseFrequency,
            seed: 0,
        }
    }
}

impl BorutaConfig {
    pub fn validate(&self) -> Result<(), BorutaError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(BorutaError::InvalidConfig(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.percentile > 0.0 && self.percentile <= 100.0) {
            return Err(BorutaError::InvalidConfig(format!("percentile must lie in (0, 100], got {}", self.percentile)));
        }
        if self.max_depth == 0 {
            return Err(BorutaError::InvalidConfig("max_depth must be at least 1".into()));
        }
        if self.tree_count_mode == TreeCountMode::Fixed(0) {
            return Err(BorutaError::InvalidConfig("fixed tree count must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    Confirmed,
    Tentative,
    Rejected,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Confirmed => "Confirmed",
            Decision::Tentative => "Tentative",
            Decision::Rejected => "Rejected",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BorutaResult {
    pub feature_names: Vec<String>,
    pub decisions: Vec<Decision>,
    pub hits: Vec<usize>,
    pub iterations_run: usize,
    /// Row per iteration; `None` for features already rejected.
    pub importance_history: Vec<Vec<Option<f64>>>,
    /// Shadow percentile each iteration's importances were compared with.
    pub shadow_threshold: Vec<f64>,
}

impl BorutaResult {
    pub fn confirmed(&self) -> impl Iterator<Item = &str> {
        self.feature_names.iter().zip(&self.decisions).filter(|(_, d)| **d == Decision::Confirmed).map(|(n, _)| n.as_str())
    }
}

/// Append `shadow_<name>` columns, each an independent row permutation.
pub fn add_shadows<R: rand::Rng>(x: &FeatureMatrix, rng: &mut R) -> Result<FeatureMatrix, FeatureError> {
    require_observed(x)?;
    let dense = x.to_dense::<f64>()?;
    let all: Vec<usize> = (0..x.n_cols()).collect();
    let values = with_shadows(dense.view(), &all, &all, rng);
    let mut names = x.column_names.clone();
    names.extend(x.column_names.iter().map(|n| format!("shadow_{n}")));
    FeatureMatrix::from_dense(names, values, x.row_ids.clone())
}

fn require_observed(x: &FeatureMatrix) -> Result<(), FeatureError> {
    match (0..x.n_cols()).find(|&j| x.missing.column(j).iter().any(|&m| m)) {
        Some(j) => Err(FeatureError::MissingCells(x.column_names[j].clone())),
        None => Ok(()),
    }
}

/// Real columns `real` followed by permuted copies of `shadow`.
fn with_shadows<T: Scalar, R: rand::Rng>(x: ArrayView2<'_, T>, real: &[usize], shadow: &[usize], rng: &mut R) -> Array2<T> {
    let (n, f) = (x.nrows(), real.len());
    let mut out = Array2::from_elem((n, f + shadow.len()), T::zero());
    for (j, &c) in real.iter().enumerate() {
        out.column_mut(j).assign(&x.column(c));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    for (j, &c) in shadow.iter().enumerate() {
        perm.shuffle(rng);
        for i in 0..n {
            out[[i, f + j]] = x[[perm[i], c]];
        }
    }
    out
}

/// Shuffle column positions so that the forest's lowest-index tie-break
/// does not systematically favour real columns over shadows. Returns the
/// shuffled matrix and, per original column, its new position.
fn scramble_columns<T: Scalar, R: rand::Rng>(x: &Array2<T>, rng: &mut R) -> (Array2<T>, Vec<usize>) {
    let mut order: Vec<usize> = (0..x.ncols()).collect();
    order.shuffle(rng);
    let mut out = Array2::from_elem(x.raw_dim(), T::zero());
    let mut position = vec![0; x.ncols()];
    for (k, &c) in order.iter().enumerate() {
        out.column_mut(k).assign(&x.column(c));
        position[c] = k;
    }
    (out, position)
}

/// Linear-interpolated percentile, `q` in [0, 100].
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q / 100.0 * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// `ln P(X = k)` for `X ~ Binomial(n, ½)`, for all `k` in `0..=n`.
fn half_binomial_log_pmf(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = -(n as f64) * std::f64::consts::LN_2;
    out.push(acc);
    for k in 0..n {
        acc += ((n - k) as f64).ln() - ((k + 1) as f64).ln();
        out.push(acc);
    }
    out
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// `P(X ≥ k)` for `X ~ Binomial(n, ½)`, summed exactly over the PMF.
pub fn binomial_upper_tail(k: usize, n: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    log_sum_exp(&half_binomial_log_pmf(n)[k..]).exp().min(1.0)
}

/// `P(X ≤ k)` for `X ~ Binomial(n, ½)`.
pub fn binomial_lower_tail(k: usize, n: usize) -> f64 {
    if k >= n {
        return 1.0;
    }
    log_sum_exp(&half_binomial_log_pmf(n)[..=k]).exp().min(1.0)
}

/// Benjamini–Hochberg: which of `ps` are discoveries at level `alpha`.
fn benjamini_hochberg(ps: &[f64], alpha: f64) -> Vec<bool> {
    let m = ps.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| ps[a].total_cmp(&ps[b]));
    let cutoff = (0..m).rev().find(|&r| ps[order[r]] <= alpha * (r + 1) as f64 / m as f64);
    let mut out = vec![false; m];
    if let Some(r) = cutoff {
        order[..=r].iter().for_each(|&i| out[i] = true);
    }
    out
}

pub fn boruta<T: Scalar>(x: ArrayView2<'_, T>, y: &[usize], config: &BorutaConfig) -> Result<BorutaResult, BorutaError> {
    config.validate()?;
    if x.nrows() != y.len() {
        return Err(BorutaError::LengthMismatch { rows: x.nrows(), labels: y.len() });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(ForestError::MissingCells.into());
    }
    let n_features = x.ncols();
    let mut decisions = vec![Decision::Tentative; n_features];
    let mut hits = vec![0usize; n_features];
    let mut history = Vec::new();
    let mut thresholds = Vec::new();
    let mut iteration = 0;
    let all: Vec<usize> = (0..n_features).collect();

    while iteration < config.max_iter && decisions.contains(&Decision::Tentative) {
        iteration += 1;
        let active: Vec<usize> = (0..n_features).filter(|&j| decisions[j] != Decision::Rejected).collect();
        let mut perm_rng = rng::substream(rng::derive_seed(config.seed, &[iteration as u64]), 0);
        let (xs, position) = scramble_columns(&with_shadows(x, &active, &all, &mut perm_rng), &mut perm_rng);
        let params = HyperParams {
            max_depth: config.max_depth,
            n_trees: config.tree_count_mode.n_trees(xs.ncols() / 2),
            features_per_split: None,
            class_weighting: config.class_weighting,
            seed: rng::derive_seed(config.seed, &[iteration as u64, 1]),
        };
        let forest = Forest::fit(xs.view(), y, &params)?;
        let imp: Vec<f64> = position.iter().map(|&k| forest.importances[k].as_f64()).collect();
        let (real, shadow) = imp.split_at(active.len());
        let threshold = percentile(shadow, config.percentile);

        let mut row = vec![None; n_features];
        for (&j, &v) in active.iter().zip(real) {
            row[j] = Some(v);
            if v > threshold {
                hits[j] += 1;
            }
        }
        history.push(row);
        thresholds.push(threshold);

        let tentative: Vec<usize> = (0..n_features).filter(|&j| decisions[j] == Decision::Tentative).collect();
        let accept_p: Vec<f64> = tentative.iter().map(|&j| binomial_upper_tail(hits[j], iteration)).collect();
        let reject_p: Vec<f64> = tentative.iter().map(|&j| binomial_lower_tail(hits[j], iteration)).collect();
        let (accept, reject) = if config.two_step {
            let per_iter = config.alpha / iteration as f64;
            let a = benjamini_hochberg(&accept_p, config.alpha);
            let r = benjamini_hochberg(&reject_p, config.alpha);
            (
                a.iter().zip(&accept_p).map(|(&d, &p)| d && p <= per_iter).collect::<Vec<_>>(),
                r.iter().zip(&reject_p).map(|(&d, &p)| d && p <= per_iter).collect::<Vec<_>>(),
            )
        } else {
            let level = config.alpha / n_features as f64;
            (accept_p.iter().map(|&p| p <= level).collect(), reject_p.iter().map(|&p| p <= level).collect())
        };
        for (t, &j) in tentative.iter().enumerate() {
            if accept[t] {
                decisions[j] = Decision::Confirmed;
            } else if reject[t] {
                decisions[j] = Decision::Rejected;
            }
        }
        log::debug!(
            "boruta iteration {iteration}: {} active, {} confirmed, {} rejected",
            active.len(),
            decisions.iter().filter(|d| **d == Decision::Confirmed).count(),
            decisions.iter().filter(|d| **d == Decision::Rejected).count()
        );
    }

    Ok(BorutaResult {
        feature_names: (0..n_features).map(|j| format!("x{j}")).collect(),
        decisions,
        hits,
        iterations_run: iteration,
        importance_history: history,
        shadow_threshold: thresholds,
    })
}

/// Runs [`boruta`] on a fully observed matrix, naming features after its columns.
pub fn boruta_run(x: &FeatureMatrix, y: &[usize], config: &BorutaConfig) -> Result<BorutaResult, BorutaError> {
    require_observed(x)?;
    let dense = x.to_dense::<f64>()?;
    let mut result = boruta(dense.view(), y, config)?;
    result.feature_names = x.column_names.clone();
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Decreased,
    Increased,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Decreased => "decreased",
            Direction::Increased => "increased",
        })
    }
}

/// A confirmed region, with direction stated for the contrast's first group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionFinding {
    pub feature: String,
    pub region: String,
    pub hemisphere: String,
    pub measure: String,
    pub mean_z: BTreeMap<String, f64>,
    pub direction: Direction,
}

/// Direction of the first group relative to the second. Under atrophy-positive
/// z-scores a larger mean z means less tissue.
pub fn direction_from_means(first: f64, second: f64) -> Direction {
    if first > second {
        Direction::Decreased
    } else {
        Direction::Increased
    }
}

/// One finding per confirmed feature. `y` is 1 for rows of `groups.0`, 0 for
/// rows of `groups.1`; `z` must carry atrophy-sign z-scores.
pub fn significant_regions(
    result: &BorutaResult,
    z: &FeatureMatrix,
    y: &[usize],
    groups: (&str, &str),
) -> Result<Vec<RegionFinding>, BorutaError> {
    if result.feature_names.len() != z.n_cols() {
        return Err(BorutaError::ColumnMismatch { result: result.feature_names.len(), matrix: z.n_cols() });
    }
    if y.len() != z.n_rows() {
        return Err(BorutaError::LengthMismatch { rows: z.n_rows(), labels: y.len() });
    }
    let group_mean = |col: usize, label: usize| {
        let v: Vec<f64> = (0..z.n_rows())
            .filter(|&i| y[i] == label && !z.missing[[i, col]])
            .map(|i| z.values[[i, col]])
            .collect();
        if v.is_empty() {
            f64::NAN
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    let mut out = Vec::new();
    for (col, name) in result.feature_names.iter().enumerate() {
        if result.decisions[col] != Decision::Confirmed {
            continue;
        }
        let rf: RegionFeature = name.parse().map_err(|_| BorutaError::NotARegion(name.clone()))?;
        let (a, b) = (group_mean(col, 1), group_mean(col, 0));
        out.push(RegionFinding {
            feature: name.clone(),
            region: rf.region.to_string(),
            hemisphere: rf.hemisphere.as_str().to_string(),
            measure: rf.measure.as_str().to_string(),
            mean_z: BTreeMap::from([(groups.0.to_string(), a), (groups.1.to_string(), b)]),
            direction: direction_from_means(a, b),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};

    #[test]
    fn auto_tree_count() {
        assert_eq!(TreeCountMode::Auto.n_trees(1), 128);
        assert_eq!(TreeCountMode::Auto.n_trees(204), 202);
        assert_eq!(TreeCountMode::Fixed(7).n_trees(204), 7);
    }

    #[test]
    fn percentile_matches_linear_interpolation() {
        let v = [3.0, 1.0, 2.0, 4.0];
        assert_eq!(percentile(&v, 100.0), 4.0);
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert!((percentile(&v, 50.0) - 2.5).abs() < 1e-15);
        assert!((percentile(&v, 90.0) - 3.7).abs() < 1e-12);
    }

    #[test]
    fn binomial_tails_small_n() {
        // n = 4: pmf = 1,4,6,4,1 over 16
        assert!((binomial_upper_tail(3, 4) - 5.0 / 16.0).abs() < 1e-15);
        assert!((binomial_lower_tail(1, 4) - 5.0 / 16.0).abs() < 1e-15);
        assert_eq!(binomial_upper_tail(0, 4), 1.0);
        assert_eq!(binomial_lower_tail(4, 4), 1.0);
        assert!((binomial_upper_tail(4, 4) - 1.0 / 16.0).abs() < 1e-15);
        assert!(binomial_upper_tail(1000, 1000) > 0.0);
    }

    #[test]
    fn bh_procedure() {
        assert_eq!(benjamini_hochberg(&[0.01, 0.04, 0.03, 0.5], 0.05), vec![true, false, false, false]);
        assert_eq!(benjamini_hochberg(&[0.01, 0.02, 0.035, 0.5], 0.05), vec![true, true, true, false]);
        // step-up: the largest p passing its rank bound carries all smaller ones
        assert_eq!(benjamini_hochberg(&[0.01, 0.04, 0.03, 0.045], 0.05), vec![true; 4]);
        assert_eq!(benjamini_hochberg(&[0.2, 0.3], 0.05), vec![false, false]);
    }

    #[test]
    fn zero_iterations_leave_everything_tentative() {
        let x = Array2::from_shape_fn((10, 3), |(i, j)| (i * 3 + j) as f64);
        let y: Vec<usize> = (0..10).map(|i| i % 2).collect();
        let r = boruta(x.view(), &y, &BorutaConfig { max_iter: 0, ..Default::default() }).unwrap();
        assert_eq!(r.iterations_run, 0);
        assert!(r.decisions.iter().all(|d| *d == Decision::Tentative));
        assert!(r.importance_history.is_empty());
    }

    #[test]
    fn informative_feature_is_confirmed() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 120;
        let y: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let x = Array2::from_shape_fn((n, 6), |(i, j)| if j == 0 { y[i] as f64 + rng.gen::<f64>() * 0.1 } else { rng.gen() });
        let cfg = BorutaConfig { max_iter: 40, seed: 9, ..Default::default() };
        let r = boruta(x.view(), &y, &cfg).unwrap();
        assert_eq!(r.decisions[0], Decision::Confirmed);
        assert!(r.hits.iter().all(|&h| h <= r.iterations_run));
        assert_eq!(r, boruta(x.view(), &y, &cfg).unwrap());
    }

    #[test]
    fn rejects_bad_config() {
        assert!(BorutaConfig { alpha: 0.0, ..Default::default() }.validate().is_err());
        assert!(BorutaConfig { percentile: 0.0, ..Default::default() }.validate().is_err());
        assert!(BorutaConfig { percentile: 100.5, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn direction_convention() {
        assert_eq!(direction_from_means(1.2, 0.1), Direction::Decreased);
        assert_eq!(direction_from_means(-0.3, 0.1), Direction::Increased);
    }
}
