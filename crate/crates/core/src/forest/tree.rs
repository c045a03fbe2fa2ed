//! CART classification trees on weighted samples.

use ndarray::ArrayView2;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ForestError;
use crate::scalar::{cmp, Scalar};

/// Gini impurity `1 - Σ p_c²` of weighted class counts.
pub fn gini<T: Scalar>(weighted_counts: &[T]) -> Result<T, ForestError> {
    if weighted_counts.iter().any(|&c| c < T::zero() || !c.is_finite()) {
        return Err(ForestError::InvalidCounts);
    }
    let total: T = weighted_counts.iter().copied().sum();
    if total <= T::zero() {
        return Err(ForestError::InvalidCounts);
    }
    Ok(gini_unchecked(weighted_counts, total))
}

#[inline]
fn gini_unchecked<T: Scalar>(counts: &[T], total: T) -> T {
    let sq: T = counts.iter().map(|&c| (c / total) * (c / total)).sum();
    T::one() - sq
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode<T> {
    Split { feature: usize, threshold: T, left: Box<TreeNode<T>>, right: Box<TreeNode<T>> },
    Leaf { class_counts: Vec<T>, depth: usize },
}

impl<T: Scalar> TreeNode<T> {
    /// Walk to the leaf for `x`; values `<= threshold` go left.
    pub fn leaf_for(&self, x: &[T]) -> &[T] {
        let mut node = self;
        loop {
            match node {
                TreeNode::Split { feature, threshold, left, right } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
                TreeNode::Leaf { class_counts, .. } => return class_counts,
            }
        }
    }

    /// Longest root-to-leaf path, in splits.
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
            TreeNode::Leaf { .. } => 0,
        }
    }

    pub fn n_splits(&self) -> usize {
        match self {
            TreeNode::Split { left, right, .. } => 1 + left.n_splits() + right.n_splits(),
            TreeNode::Leaf { .. } => 0,
        }
    }

    /// Depth recorded on every leaf.
    pub fn leaf_depths(&self) -> Vec<usize> {
        match self {
            TreeNode::Split { left, right, .. } => {
                let mut d = left.leaf_depths();
                d.extend(right.leaf_depths());
                d
            }
            TreeNode::Leaf { depth, .. } => vec![*depth],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice<T> {
    pub feature: usize,
    pub threshold: T,
    /// `gini(parent) - (w_l/w) gini(left) - (w_r/w) gini(right)`.
    pub impurity_decrease: T,
}

/// Scratch buffer reused across split searches.
#[derive(Default)]
pub(crate) struct SplitBuffer<T> {
    items: Vec<(T, usize, T)>,
    left: Vec<T>,
    right: Vec<T>,
}

fn midpoint<T: Scalar>(a: T, b: T) -> T {
    let m = a + (b - a) / T::of(2.0);
    if m < b && m >= a {
        m
    } else {
        a
    }
}

/// Best split of `rows` over `candidate_features`.
///
/// Every midpoint between adjacent distinct values is considered. Ties keep
/// the earliest candidate (features in the given order, thresholds
/// ascending). Returns `None` if no split lowers the impurity.
pub fn best_split<T: Scalar>(
    x: ArrayView2<'_, T>,
    y: &[usize],
    weights: &[T],
    rows: &[usize],
    candidate_features: &[usize],
    n_classes: usize,
) -> Option<SplitChoice<T>> {
    best_split_with(x, y, weights, rows, candidate_features, n_classes, &mut SplitBuffer::default())
}

pub(crate) fn best_split_with<T: Scalar>(
    x: ArrayView2<'_, T>,
    y: &[usize],
    weights: &[T],
    rows: &[usize],
    candidate_features: &[usize],
    n_classes: usize,
    buf: &mut SplitBuffer<T>,
) -> Option<SplitChoice<T>> {
    if rows.len() < 2 {
        return None;
    }
    let mut parent = vec![T::zero(); n_classes];
    for &r in rows {
        parent[y[r]] = parent[y[r]] + weights[r];
    }
    let total: T = parent.iter().copied().sum();
    if total <= T::zero() || parent.iter().filter(|&&c| c > T::zero()).count() < 2 {
        return None;
    }
    let parent_gini = gini_unchecked(&parent, total);
    let min_gain = T::epsilon() * T::of(16.0);

    let mut best: Option<SplitChoice<T>> = None;
    for &f in candidate_features {
        buf.items.clear();
        buf.items.extend(rows.iter().map(|&r| (x[[r, f]], y[r], weights[r])));
        buf.items.sort_unstable_by(|a, b| cmp(&a.0, &b.0));
        if buf.items[0].0 == buf.items[buf.items.len() - 1].0 {
            continue;
        }
        buf.left.clear();
        buf.left.resize(n_classes, T::zero());
        let mut w_left = T::zero();
        let n = buf.items.len();
        for i in 0..n - 1 {
            let (v, c, w) = buf.items[i];
            buf.left[c] = buf.left[c] + w;
            w_left = w_left + w;
            let next = buf.items[i + 1].0;
            if !(v < next) {
                continue;
            }
            let w_right = total - w_left;
            if w_left <= T::zero() || w_right <= T::zero() {
                continue;
            }
            buf.right.clear();
            buf.right.extend(parent.iter().zip(&buf.left).map(|(&p, &l)| p - l));
            let g_left = gini_unchecked(&buf.left, w_left);
            let g_right = gini_unchecked(&buf.right, w_right);
            let decrease = parent_gini - (w_left / total) * g_left - (w_right / total) * g_right;
            if decrease > min_gain && best.is_none_or(|b| decrease > b.impurity_decrease) {
                best = Some(SplitChoice { feature: f, threshold: midpoint(v, next), impurity_decrease: decrease });
            }
        }
    }
    best
}

/// Tree-growing settings shared by all trees of a forest.
pub(crate) struct Grower<'a, 'b, T> {
    pub x: ArrayView2<'a, T>,
    pub y: &'b [usize],
    pub n_classes: usize,
    pub max_depth: usize,
    pub features_per_split: usize,
}

impl<T: Scalar> Grower<'_, '_, T> {
    /// Grow one tree on rows with positive `weights`. `importance` receives
    /// the un-normalized weighted impurity decrease per feature.
    pub fn grow<R: Rng>(&self, weights: &[T], rng: &mut R, importance: &mut [T]) -> TreeNode<T> {
        let rows: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > T::zero()).collect();
        let total: T = rows.iter().map(|&r| weights[r]).sum();
        let mut buf = SplitBuffer::default();
        self.node(rows, 0, weights, total, rng, importance, &mut buf)
    }

    #[allow(clippy::too_many_arguments)]
    fn node<R: Rng>(
        &self,
        rows: Vec<usize>,
        depth: usize,
        weights: &[T],
        root_total: T,
        rng: &mut R,
        importance: &mut [T],
        buf: &mut SplitBuffer<T>,
    ) -> TreeNode<T> {
        let mut counts = vec![T::zero(); self.n_classes];
        for &r in &rows {
            counts[self.y[r]] = counts[self.y[r]] + weights[r];
        }
        let pure = counts.iter().filter(|&&c| c > T::zero()).count() < 2;
        if depth >= self.max_depth || pure || rows.len() < 2 {
            return TreeNode::Leaf { class_counts: counts, depth };
        }
        let n_features = self.x.ncols();
        let mut candidates = index::sample(rng, n_features, self.features_per_split.min(n_features)).into_vec();
        candidates.sort_unstable();
        let Some(split) = best_split_with(self.x, self.y, weights, &rows, &candidates, self.n_classes, buf) else {
            return TreeNode::Leaf { class_counts: counts, depth };
        };
        let node_total: T = counts.iter().copied().sum();
        importance[split.feature] = importance[split.feature] + node_total / root_total * split.impurity_decrease;

        let (left, right): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&r| self.x[[r, split.feature]] <= split.threshold);
        let left = self.node(left, depth + 1, weights, root_total, rng, importance, buf);
        let right = self.node(right, depth + 1, weights, root_total, rng, importance, buf);
        TreeNode::Split { feature: split.feature, threshold: split.threshold, left: Box::new(left), right: Box::new(right) }
    }
}
