use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::scalar::{cmp, Scalar};

/// One ROC vertex. `threshold` is `None` for the (0, 0) anchor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint<T> {
    pub threshold: Option<T>,
    pub fpr: T,
    pub tpr: T,
}

fn class_counts(labels: &[usize]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&l| l == 1).count();
    (pos, labels.len() - pos)
}

/// ROC curve with one vertex per distinct score (predict positive when
/// `score >= threshold`), anchored at (0, 0) and ending at (1, 1).
pub fn roc_curve<T: Scalar>(scores: &[T], labels: &[usize]) -> Result<Vec<RocPoint<T>>, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch(scores.len(), labels.len()));
    }
    let (n_pos, n_neg) = class_counts(labels);
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| cmp(&scores[b], &scores[a]));

    let mut points = vec![RocPoint { threshold: None, fpr: T::zero(), tpr: T::zero() }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold: Some(s),
            fpr: T::of_usize(fp) / T::of_usize(n_neg),
            tpr: T::of_usize(tp) / T::of_usize(n_pos),
        });
    }
    Ok(points)
}

/// Trapezoidal area under an ROC curve.
pub fn auc<T: Scalar>(points: &[RocPoint<T>]) -> T {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / T::of(2.0))
        .sum()
}

/// Mann–Whitney U of the positive class over the negatives, divided by
/// `n_pos · n_neg`; ties count one half (mid-ranks).
pub fn mann_whitney_auc<T: Scalar>(scores: &[T], labels: &[usize]) -> Result<T, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch(scores.len(), labels.len()));
    }
    let (n_pos, n_neg) = class_counts(labels);
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| cmp(&scores[a], &scores[b]));
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j share their mean
        let mid = (i + 1 + j) as f64 / 2.0;
        rank_sum_pos += mid * order[i..j].iter().filter(|&&k| labels[k] == 1).count() as f64;
        i = j;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(T::of(u / (n_pos as f64 * n_neg as f64)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separating_and_inverted() {
        let labels = [0, 0, 1, 1];
        let pts = roc_curve(&[0.1, 0.2, 0.8, 0.9], &labels).unwrap();
        assert_eq!(auc(&pts), 1.0);
        let pts = roc_curve(&[0.9, 0.8, 0.2, 0.1], &labels).unwrap();
        assert_eq!(auc(&pts), 0.0);
    }

    #[test]
    fn small_example() {
        let pts = roc_curve(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap();
        assert!((auc(&pts) - 0.75f64).abs() < 1e-15);
        assert_eq!(pts.first().unwrap().threshold, None);
        assert_eq!((pts.last().unwrap().fpr, pts.last().unwrap().tpr), (1.0, 1.0));
        assert!((mann_whitney_auc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap() - 0.75f64).abs() < 1e-15);
    }

    #[test]
    fn ties_give_half_credit() {
        let pts = roc_curve(&[0.5, 0.5], &[0, 1]).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(auc(&pts), 0.5);
        assert_eq!(mann_whitney_auc(&[0.5, 0.5], &[0, 1]).unwrap(), 0.5);
    }

    #[test]
    fn single_class_is_error() {
        assert!(matches!(roc_curve(&[0.1, 0.2], &[1, 1]), Err(EvalError::SingleClass)));
        assert!(matches!(mann_whitney_auc(&[0.1, 0.2], &[0, 0]), Err(EvalError::SingleClass)));
    }
}
