use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::cohort::DiagnosticGroup;
use crate::features::{ClinicianDx, SubjectRecord};

/// Binary confusion counts; class 1 is the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn new(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        Self { tp, fp, tn, fn_ }
    }

    pub fn from_predictions(predicted: &[usize], truth: &[usize]) -> Result<Self, EvalError> {
        if predicted.len() != truth.len() {
            return Err(EvalError::LengthMismatch(predicted.len(), truth.len()));
        }
        let mut c = Confusion::default();
        for (&p, &t) in predicted.iter().zip(truth) {
            match (p == 1, t == 1) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn merge(self, other: Confusion) -> Confusion {
        Confusion::new(self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn_ + other.fn_)
    }
}

/// `tp / (tp + fn)`.
pub fn recall(c: &Confusion) -> Result<f64, EvalError> {
    if c.tp + c.fn_ == 0 {
        return Err(EvalError::UndefinedMetric("recall"));
    }
    Ok(c.tp as f64 / (c.tp + c.fn_) as f64)
}

/// `tp / (tp + fp)`.
pub fn precision(c: &Confusion) -> Result<f64, EvalError> {
    if c.tp + c.fp == 0 {
        return Err(EvalError::UndefinedMetric("precision"));
    }
    Ok(c.tp as f64 / (c.tp + c.fp) as f64)
}

/// Harmonic mean of precision and recall.
pub fn f1_score(precision: f64, recall: f64) -> Result<f64, EvalError> {
    if !(precision + recall > 0.0) {
        return Err(EvalError::UndefinedMetric("f1"));
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

/// F1 from counts. Requires defined precision and recall; zero when
/// there are no true positives.
pub fn f1(c: &Confusion) -> Result<f64, EvalError> {
    let p = precision(c)?;
    let r = recall(c)?;
    if c.tp == 0 {
        return Ok(0.0);
    }
    f1_score(p, r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupBaseline {
    pub group: String,
    pub called_ad: usize,
    pub total: usize,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRecall {
    pub groups: Vec<GroupBaseline>,
    /// AD-group records without an initial clinician diagnosis.
    pub skipped: usize,
}

/// Recall of the initial clinician AD call within tAD and within atAD.
pub fn baseline_recall(records: &[SubjectRecord], groups: &[DiagnosticGroup]) -> Result<BaselineRecall, EvalError> {
    if records.len() != groups.len() {
        return Err(EvalError::LengthMismatch(records.len(), groups.len()));
    }
    let mut skipped = 0;
    let mut out = Vec::new();
    for target in [DiagnosticGroup::Tad, DiagnosticGroup::Atad] {
        let mut c = Confusion::default();
        for (r, g) in records.iter().zip(groups) {
            if *g != target {
                continue;
            }
            match r.initial_clinician_dx {
                Some(ClinicianDx::Ad) => c.tp += 1,
                Some(ClinicianDx::NonAd) => c.fn_ += 1,
                None => skipped += 1,
            }
        }
        if let Ok(rec) = recall(&c) {
            out.push(GroupBaseline { group: target.to_string(), called_ad: c.tp, total: c.tp + c.fn_, recall: rec });
        }
    }
    if out.is_empty() {
        return Err(EvalError::UndefinedMetric("baseline recall"));
    }
    Ok(BaselineRecall { groups: out, skipped })
}
