//! Random forest classifier grown from depth-bounded CART trees.
//!
//! Each tree sees a bootstrap sample of the training rows (drawn with
//! replacement, same size) and, at every node, a fresh random subset of
//! candidate features. Leaves hold weighted class counts; the forest
//! probability is the mean of per-tree leaf proportions. Feature importance
//! is the mean decrease in weighted Gini impurity, normalized per tree and
//! again over the forest.
//!
//! Tree `t` draws all of its randomness from substream `t` of the forest
//! seed, so results do not depend on how trees are scheduled across threads.

mod tree;

use ndarray::ArrayView2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use tree::{best_split, gini, SplitChoice, TreeNode};

use crate::features::FeatureMatrix;
use crate::rng;
use crate::scalar::Scalar;

/// Depths searched by the default grid.
pub const GRID_MAX_DEPTHS: [usize; 5] = [1, 2, 3, 4, 5];
/// Ensemble sizes searched by the default grid.
pub const GRID_N_TREES: [usize; 5] = [2, 5, 10, 100, 1000];

pub const FOREST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForestError {
    #[error("class counts must be nonnegative with a positive total")]
    InvalidCounts,
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("input has missing or non-finite cells")]
    MissingCells,
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid hyperparameters: {0}")]
    InvalidParams(String),
    #[error("unsupported forest document version {0}")]
    UnsupportedVersion(u32),
    #[error("forest document: {0}")]
    Serde(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeighting {
    #[default]
    None,
    /// `n / (k · n_c)` for class `c`.
    InverseFrequency,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HyperParams {
    pub max_depth: usize,
    pub n_trees: usize,
    /// Candidates per node; `None` means ⌈√F⌉.
    pub features_per_split: Option<usize>,
    #[serde(default)]
    pub class_weighting: ClassWeighting,
    pub seed: u64,
}

impl HyperParams {
    pub fn new(max_depth: usize, n_trees: usize) -> Self {
        Self { max_depth, n_trees, features_per_split: None, class_weighting: ClassWeighting::None, seed: 0 }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_class_weighting(mut self, w: ClassWeighting) -> Self {
        self.class_weighting = w;
        self
    }

    pub fn features_per_split_for(&self, n_features: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| (n_features as f64).sqrt().ceil() as usize)
            .clamp(1, n_features.max(1))
    }

    fn validate(&self) -> Result<(), ForestError> {
        if self.max_depth == 0 {
            return Err(ForestError::InvalidParams("max_depth must be at least 1".into()));
        }
        if self.n_trees == 0 {
            return Err(ForestError::InvalidParams("n_trees must be at least 1".into()));
        }
        if self.features_per_split == Some(0) {
            return Err(ForestError::InvalidParams("features_per_split must be at least 1".into()));
        }
        Ok(())
    }
}

/// The 5 × 5 depth/size grid used for tuning.
pub fn default_grid() -> Vec<HyperParams> {
    GRID_MAX_DEPTHS
        .iter()
        .flat_map(|&d| GRID_N_TREES.iter().map(move |&t| HyperParams::new(d, t)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest<T> {
    pub trees: Vec<TreeNode<T>>,
    pub params: HyperParams,
    pub n_features: usize,
    pub n_classes: usize,
    /// Nonnegative; sums to 1 when any tree split.
    pub importances: Vec<T>,
}

/// Per-class weights for `y`, or all ones.
pub fn class_weights<T: Scalar>(y: &[usize], n_classes: usize, mode: ClassWeighting) -> Vec<T> {
    match mode {
        ClassWeighting::None => vec![T::one(); n_classes],
        ClassWeighting::InverseFrequency => {
            let mut counts = vec![0usize; n_classes];
            for &c in y {
                counts[c] += 1;
            }
            let present = counts.iter().filter(|&&c| c > 0).count();
            counts
                .iter()
                .map(|&c| if c == 0 { T::zero() } else { T::of_usize(y.len()) / (T::of_usize(present) * T::of_usize(c)) })
                .collect()
        }
    }
}

/// Bootstrap multiplicities: `n` draws with replacement from `0..n`.
pub fn bootstrap_counts<R: Rng>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut counts = vec![0usize; n];
    for _ in 0..n {
        counts[rng.gen_range(0..n)] += 1;
    }
    counts
}

impl<T: Scalar> Forest<T> {
    pub fn fit(x: ArrayView2<'_, T>, y: &[usize], params: &HyperParams) -> Result<Self, ForestError> {
        params.validate()?;
        let (n, f) = x.dim();
        if y.len() != n {
            return Err(ForestError::DimensionMismatch { expected: n, got: y.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ForestError::MissingCells);
        }
        let n_classes = y.iter().copied().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; n_classes];
        y.iter().for_each(|&c| seen[c] = true);
        if seen.iter().filter(|&&s| s).count() < 2 {
            return Err(ForestError::SingleClass);
        }
        let cw: Vec<T> = class_weights(y, n_classes, params.class_weighting);
        let grower = tree::Grower {
            x,
            y,
            n_classes,
            max_depth: params.max_depth,
            features_per_split: params.features_per_split_for(f),
        };

        let grown: Vec<(TreeNode<T>, Vec<T>)> = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = rng::substream(params.seed, t as u64);
                let counts = bootstrap_counts(n, &mut rng);
                let weights: Vec<T> = counts.iter().zip(y).map(|(&c, &cls)| T::of_usize(c) * cw[cls]).collect();
                let mut imp = vec![T::zero(); f];
                let node = grower.grow(&weights, &mut rng, &mut imp);
                (node, imp)
            })
            .collect();

        let mut importances = vec![T::zero(); f];
        let mut trees = Vec::with_capacity(grown.len());
        for (node, imp) in grown {
            let total: T = imp.iter().copied().sum();
            if total > T::zero() {
                for (acc, v) in importances.iter_mut().zip(&imp) {
                    *acc = *acc + *v / total;
                }
            }
            trees.push(node);
        }
        let total: T = importances.iter().copied().sum();
        if total > T::zero() {
            importances.iter_mut().for_each(|v| *v = *v / total);
        }
        Ok(Forest { trees, params: *params, n_features: f, n_classes, importances })
    }

    fn check_dim(&self, x: &[T]) -> Result<(), ForestError> {
        if x.len() != self.n_features {
            return Err(ForestError::DimensionMismatch { expected: self.n_features, got: x.len() });
        }
        Ok(())
    }

    /// Mean over trees of leaf class proportions.
    pub fn predict_proba(&self, x: &[T]) -> Result<Vec<T>, ForestError> {
        self.check_dim(x)?;
        let mut p = vec![T::zero(); self.n_classes];
        for tree in &self.trees {
            let counts = tree.leaf_for(x);
            let total: T = counts.iter().copied().sum();
            if total > T::zero() {
                for (acc, &c) in p.iter_mut().zip(counts) {
                    *acc = *acc + c / total;
                }
            }
        }
        let n = T::of_usize(self.trees.len());
        p.iter_mut().for_each(|v| *v = *v / n);
        Ok(p)
    }

    /// Probability of class 1 for every row of `x`.
    pub fn predict_positive(&self, x: ArrayView2<'_, T>) -> Result<Vec<T>, ForestError> {
        (0..x.nrows())
            .into_par_iter()
            .map(|i| Ok(self.predict_proba(&x.row(i).to_vec())?[1]))
            .collect()
    }

    /// Binary: class 1 iff its probability is at least `threshold` (ties go
    /// to class 1). More than two classes: most probable class.
    pub fn predict(&self, x: &[T], threshold: T) -> Result<usize, ForestError> {
        let p = self.predict_proba(x)?;
        if self.n_classes == 2 {
            return Ok(usize::from(p[1] >= threshold));
        }
        Ok(p.iter().enumerate().fold(0, |best, (i, v)| if *v > p[best] { i } else { best }))
    }
}

impl<T: Scalar + Serialize + for<'de> Deserialize<'de>> Forest<T> {
    /// Versioned JSON document.
    pub fn to_json(&self) -> Result<String, ForestError> {
        #[derive(Serialize)]
        struct Doc<'a, T> {
            schema_version: u32,
            forest: &'a Forest<T>,
        }
        serde_json::to_string(&Doc { schema_version: FOREST_SCHEMA_VERSION, forest: self }).map_err(|e| ForestError::Serde(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self, ForestError> {
        #[derive(Deserialize)]
        #[serde(bound = "T: Deserialize<'de>")]
        struct Doc<T> {
            schema_version: u32,
            forest: Forest<T>,
        }
        let doc: Doc<T> = serde_json::from_str(s).map_err(|e| ForestError::Serde(e.to_string()))?;
        if doc.schema_version != FOREST_SCHEMA_VERSION {
            return Err(ForestError::UnsupportedVersion(doc.schema_version));
        }
        Ok(doc.forest)
    }
}

/// Grow a single tree on explicit per-row sample weights (zero excludes a
/// row). Returns the tree and its un-normalized importances.
pub fn grow_tree<T: Scalar, R: Rng>(
    x: ArrayView2<'_, T>,
    y: &[usize],
    weights: &[T],
    max_depth: usize,
    features_per_split: usize,
    rng: &mut R,
) -> (TreeNode<T>, Vec<T>) {
    let n_classes = y.iter().copied().max().map_or(1, |m| m + 1);
    let grower = tree::Grower { x, y, n_classes, max_depth, features_per_split };
    let mut imp = vec![T::zero(); x.ncols()];
    let node = grower.grow(weights, rng, &mut imp);
    (node, imp)
}

/// Fit on a fully observed feature matrix.
pub fn fit_forest(x: &FeatureMatrix, y: &[usize], params: &HyperParams) -> Result<Forest<f64>, ForestError> {
    let dense = x.to_dense::<f64>().map_err(|_| ForestError::MissingCells)?;
    Forest::fit(dense.view(), y, params)
}
