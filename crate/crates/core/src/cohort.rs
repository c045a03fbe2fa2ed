//! Diagnostic group assignment from biomarker, memory and clinical criteria.
//!
//! Each subject lands in exactly one of tAD, atAD, nonAD, CN or Excluded.
//! Every rule evaluated along the way is recorded so the assignment can be
//! audited after the fact.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{Presentation, SubjectRecord};

pub const AMYLOID_SUVR_POSITIVE: f64 = 1.48;
pub const TAU_SUVR_POSITIVE: f64 = 1.29;
/// CSF positivity is strict on all three cutoffs.
pub const CSF_ABETA42_BELOW: f64 = 700.0;
pub const CSF_TTAU_ABOVE: f64 = 400.0;
pub const CSF_PTAU_ABOVE: f64 = 60.0;
pub const CERAD_POSITIVE: [u8; 2] = [2, 3];
pub const BRAAK_POSITIVE_MIN: u8 = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CohortError {
    #[error("invalid value for {field}: {value}")]
    InvalidValue { field: &'static str, value: String },
    #[error("incomplete biomarker panel: missing {missing}")]
    IncompletePanel { missing: &'static str },
    #[error("subject {subject_id}: missing {field}")]
    IncompleteRecord { subject_id: String, field: &'static str },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BiomarkerPanel {
    pub amyloid_suvr: Option<f64>,
    /// Temporal-lobe tau SUVR.
    pub tau_suvr: Option<f64>,
    pub csf_abeta42: Option<f64>,
    pub csf_ttau: Option<f64>,
    pub csf_ptau: Option<f64>,
    pub cerad: Option<u8>,
    pub braak: Option<u8>,
}

impl BiomarkerPanel {
    pub fn validate(&self) -> Result<(), CohortError> {
        let ratios = [
            ("amyloid_suvr", self.amyloid_suvr),
            ("tau_suvr", self.tau_suvr),
            ("csf_abeta42", self.csf_abeta42),
            ("csf_ttau", self.csf_ttau),
            ("csf_ptau", self.csf_ptau),
        ];
        for (field, v) in ratios {
            if let Some(v) = v {
                if !v.is_finite() || v < 0.0 {
                    return Err(CohortError::InvalidValue { field, value: v.to_string() });
                }
            }
        }
        if let Some(c) = self.cerad {
            if c > 3 {
                return Err(CohortError::InvalidValue { field: "cerad", value: c.to_string() });
            }
        }
        if let Some(b) = self.braak {
            if b > 6 {
                return Err(CohortError::InvalidValue { field: "braak", value: b.to_string() });
            }
        }
        Ok(())
    }
}

fn check_ratio(field: &'static str, v: f64) -> Result<(), CohortError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(CohortError::InvalidValue { field, value: v.to_string() })
    }
}

pub fn amyloid_pet_positive(suvr: f64) -> Result<bool, CohortError> {
    check_ratio("amyloid_suvr", suvr)?;
    Ok(suvr >= AMYLOID_SUVR_POSITIVE)
}

pub fn tau_pet_positive(suvr: f64) -> Result<bool, CohortError> {
    check_ratio("tau_suvr", suvr)?;
    Ok(suvr >= TAU_SUVR_POSITIVE)
}

/// All three CSF values are required; a partial panel is an error the caller
/// decides how to handle.
pub fn csf_positive(abeta42: Option<f64>, ttau: Option<f64>, ptau: Option<f64>) -> Result<bool, CohortError> {
    let abeta42 = abeta42.ok_or(CohortError::IncompletePanel { missing: "csf_abeta42" })?;
    let ttau = ttau.ok_or(CohortError::IncompletePanel { missing: "csf_ttau" })?;
    let ptau = ptau.ok_or(CohortError::IncompletePanel { missing: "csf_ptau" })?;
    check_ratio("csf_abeta42", abeta42)?;
    check_ratio("csf_ttau", ttau)?;
    check_ratio("csf_ptau", ptau)?;
    Ok(abeta42 < CSF_ABETA42_BELOW && ttau > CSF_TTAU_ABOVE && ptau > CSF_PTAU_ABOVE)
}

pub fn neuropath_positive(cerad: i64, braak: i64) -> Result<bool, CohortError> {
    if !(0..=3).contains(&cerad) {
        return Err(CohortError::InvalidValue { field: "cerad", value: cerad.to_string() });
    }
    if !(0..=6).contains(&braak) {
        return Err(CohortError::InvalidValue { field: "braak", value: braak.to_string() });
    }
    Ok(CERAD_POSITIVE.contains(&(cerad as u8)) && braak >= BRAAK_POSITIVE_MIN as i64)
}

/// Education-adjusted logical-memory cutoff: amnestic iff the score falls
/// below the threshold for the subject's education band.
pub fn lm_is_amnestic(lm_score: i64, education_years: i64) -> Result<bool, CohortError> {
    if lm_score < 0 {
        return Err(CohortError::InvalidValue { field: "lm_score", value: lm_score.to_string() });
    }
    if education_years < 0 {
        return Err(CohortError::InvalidValue { field: "education_years", value: education_years.to_string() });
    }
    Ok(lm_score < lm_cutoff(education_years as u32) as i64)
}

/// Lowest non-amnestic LM score for the given education.
pub fn lm_cutoff(education_years: u32) -> u32 {
    match education_years {
        16.. => 9,
        8..=15 => 5,
        _ => 3,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BiomarkerStatus {
    Positive,
    Negative,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleOutcome {
    pub rule: String,
    pub passed: bool,
    pub detail: String,
}

impl RuleOutcome {
    pub fn new(rule: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self { rule: rule.to_string(), passed, detail: detail.into() }
    }
}

impl fmt::Display for RuleOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.rule, if self.passed { "pass" } else { "fail" })
    }
}

/// Per-modality outcome: `None` when the modality is incomplete.
fn modality_outcomes(panel: &BiomarkerPanel) -> Vec<(&'static str, Option<bool>, String)> {
    let pet = match (panel.amyloid_suvr, panel.tau_suvr) {
        (Some(a), Some(t)) => match (amyloid_pet_positive(a), tau_pet_positive(t)) {
            (Ok(ap), Ok(tp)) => (Some(ap && tp), format!("amyloid_suvr={a} tau_suvr={t}")),
            _ => (None, "invalid PET values".to_string()),
        },
        (Some(a), None) => (None, format!("indeterminate-pet: amyloid_suvr={a}, tau missing")),
        (None, Some(t)) => (None, format!("indeterminate-pet: tau_suvr={t}, amyloid missing")),
        (None, None) => (None, "no PET".to_string()),
    };
    let csf = match csf_positive(panel.csf_abeta42, panel.csf_ttau, panel.csf_ptau) {
        Ok(p) => (
            Some(p),
            format!(
                "abeta42={} ttau={} ptau={}",
                panel.csf_abeta42.unwrap_or_default(),
                panel.csf_ttau.unwrap_or_default(),
                panel.csf_ptau.unwrap_or_default()
            ),
        ),
        Err(CohortError::IncompletePanel { missing }) => {
            let any = panel.csf_abeta42.is_some() || panel.csf_ttau.is_some() || panel.csf_ptau.is_some();
            (None, if any { format!("partial CSF panel: missing {missing}") } else { "no CSF".to_string() })
        }
        Err(_) => (None, "invalid CSF values".to_string()),
    };
    let neuropath = match (panel.cerad, panel.braak) {
        (Some(c), Some(b)) => match neuropath_positive(c as i64, b as i64) {
            Ok(p) => (Some(p), format!("cerad={c} braak={b}")),
            Err(_) => (None, "invalid neuropathology codes".to_string()),
        },
        (None, None) => (None, "no neuropathology".to_string()),
        _ => (None, "partial neuropathology".to_string()),
    };
    vec![("pet", pet.0, pet.1), ("csf", csf.0, csf.1), ("neuropath", neuropath.0, neuropath.1)]
}

pub fn ad_biomarker_status(panel: &BiomarkerPanel) -> BiomarkerStatus {
    assess_biomarkers(panel).0
}

/// Status plus one audit entry per modality. A positive modality wins over
/// negative ones; the conflict is recorded.
pub fn assess_biomarkers(panel: &BiomarkerPanel) -> (BiomarkerStatus, Vec<RuleOutcome>) {
    let outcomes = modality_outcomes(panel);
    let mut rules: Vec<RuleOutcome> = outcomes
        .iter()
        .map(|(name, result, detail)| match result {
            Some(p) => RuleOutcome::new(name, *p, detail.clone()),
            None => RuleOutcome::new(name, false, format!("incomplete: {detail}")),
        })
        .collect();
    let any_pos = outcomes.iter().any(|(_, r, _)| *r == Some(true));
    let any_neg = outcomes.iter().any(|(_, r, _)| *r == Some(false));
    let status = if any_pos {
        if any_neg {
            rules.push(RuleOutcome::new("modality-conflict", true, "positive modality overrides negative"));
        }
        BiomarkerStatus::Positive
    } else if any_neg {
        BiomarkerStatus::Negative
    } else {
        BiomarkerStatus::Indeterminate
    };
    (status, rules)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DiagnosticGroup {
    Tad,
    Atad,
    NonAd,
    Cn,
    Excluded(String),
}

impl DiagnosticGroup {
    pub fn is_excluded(&self) -> bool {
        matches!(self, DiagnosticGroup::Excluded(_))
    }

    /// The four analysis groups, in reporting order.
    pub const ANALYSIS: [DiagnosticGroup; 4] =
        [DiagnosticGroup::Tad, DiagnosticGroup::Atad, DiagnosticGroup::NonAd, DiagnosticGroup::Cn];
}

impl fmt::Display for DiagnosticGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DiagnosticGroup::Tad => f.write_str("tAD"),
            DiagnosticGroup::Atad => f.write_str("atAD"),
            DiagnosticGroup::NonAd => f.write_str("nonAD"),
            DiagnosticGroup::Cn => f.write_str("CN"),
            DiagnosticGroup::Excluded(reason) => write!(f, "Excluded({reason})"),
        }
    }
}

impl FromStr for DiagnosticGroup {
    type Err = CohortError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tAD" => Ok(DiagnosticGroup::Tad),
            "atAD" => Ok(DiagnosticGroup::Atad),
            "nonAD" => Ok(DiagnosticGroup::NonAd),
            "CN" => Ok(DiagnosticGroup::Cn),
            _ => s
                .strip_prefix("Excluded(")
                .and_then(|r| r.strip_suffix(')'))
                .filter(|r| !r.is_empty())
                .map(|r| DiagnosticGroup::Excluded(r.to_string()))
                .ok_or_else(|| CohortError::InvalidValue { field: "group", value: s.to_string() }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAssignment {
    pub subject_id: String,
    pub group: DiagnosticGroup,
    pub fired_rules: Vec<RuleOutcome>,
}

impl GroupAssignment {
    /// `rule=pass;rule=fail;...` as written to the group CSV.
    pub fn rules_summary(&self) -> String {
        self.fired_rules.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(";")
    }
}

pub fn assign_group(record: &SubjectRecord) -> Result<GroupAssignment, CohortError> {
    let mut rules = Vec::new();
    let done = |group, rules| Ok(GroupAssignment { subject_id: record.subject_id.clone(), group, fired_rules: rules });

    if record.tbi {
        rules.push(RuleOutcome::new("no-tbi", false, "traumatic brain injury reported"));
        return done(DiagnosticGroup::Excluded("tbi".into()), rules);
    }
    rules.push(RuleOutcome::new("no-tbi", true, "no traumatic brain injury"));

    let (status, modality_rules) = assess_biomarkers(&record.panel);
    rules.extend(modality_rules);
    match status {
        BiomarkerStatus::Indeterminate => {
            rules.push(RuleOutcome::new("biomarker-status", false, "no complete modality"));
            done(DiagnosticGroup::Excluded("indeterminate-biomarkers".into()), rules)
        }
        BiomarkerStatus::Positive => {
            rules.push(RuleOutcome::new("biomarker-status", true, "AD pathology evidence"));
            let amnestic = match record.presentation_override {
                Some(p) => {
                    let amnestic = p == Presentation::Amnestic;
                    rules.push(RuleOutcome::new("presentation-override", amnestic, p.to_string()));
                    amnestic
                }
                None => {
                    let lm = record.lm_score.ok_or_else(|| CohortError::IncompleteRecord {
                        subject_id: record.subject_id.clone(),
                        field: "lm_score",
                    })?;
                    let amnestic = lm_is_amnestic(lm as i64, record.education_years as i64)?;
                    rules.push(RuleOutcome::new(
                        "lm-amnestic",
                        amnestic,
                        format!("lm={lm} education={} cutoff={}", record.education_years, lm_cutoff(record.education_years)),
                    ));
                    amnestic
                }
            };
            done(if amnestic { DiagnosticGroup::Tad } else { DiagnosticGroup::Atad }, rules)
        }
        BiomarkerStatus::Negative => {
            rules.push(RuleOutcome::new("biomarker-status", false, "biomarker negative"));
            rules.push(RuleOutcome::new(
                "impairment",
                record.impairment_diagnosis,
                if record.impairment_diagnosis { "cognitive impairment diagnosed" } else { "no impairment" },
            ));
            done(if record.impairment_diagnosis { DiagnosticGroup::NonAd } else { DiagnosticGroup::Cn }, rules)
        }
    }
}

/// Assign every record; subjects are independent so this runs in parallel.
pub fn assign_all(records: &[SubjectRecord]) -> Result<Vec<GroupAssignment>, CohortError> {
    records.par_iter().map(assign_group).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::SubjectRecord;

    fn panel() -> BiomarkerPanel {
        BiomarkerPanel::default()
    }

    #[test]
    fn pet_thresholds() {
        assert!(amyloid_pet_positive(1.48).unwrap());
        assert!(!amyloid_pet_positive(1.479).unwrap());
        assert!(amyloid_pet_positive(2.10).unwrap());
        assert!(tau_pet_positive(1.29).unwrap());
        assert!(!tau_pet_positive(1.28).unwrap());
        assert!(!tau_pet_positive(0.90).unwrap());
        assert!(amyloid_pet_positive(f64::NAN).is_err());
        assert!(tau_pet_positive(f64::INFINITY).is_err());
    }

    #[test]
    fn csf_cutoffs_are_strict() {
        assert!(csf_positive(Some(650.0), Some(450.0), Some(70.0)).unwrap());
        assert!(!csf_positive(Some(700.0), Some(450.0), Some(70.0)).unwrap());
        assert!(!csf_positive(Some(650.0), Some(400.0), Some(70.0)).unwrap());
        assert!(!csf_positive(Some(650.0), Some(450.0), Some(60.0)).unwrap());
        assert_eq!(
            csf_positive(Some(650.0), None, Some(70.0)),
            Err(CohortError::IncompletePanel { missing: "csf_ttau" })
        );
    }

    #[test]
    fn neuropathology() {
        assert!(neuropath_positive(2, 3).unwrap());
        assert!(!neuropath_positive(3, 2).unwrap());
        assert!(!neuropath_positive(1, 6).unwrap());
        assert!(neuropath_positive(4, 3).is_err());
        assert!(neuropath_positive(2, 7).is_err());
    }

    #[test]
    fn lm_education_bands() {
        assert!(lm_is_amnestic(8, 16).unwrap());
        assert!(!lm_is_amnestic(9, 16).unwrap());
        assert!(!lm_is_amnestic(5, 8).unwrap());
        assert!(lm_is_amnestic(4, 15).unwrap());
        assert!(lm_is_amnestic(2, 7).unwrap());
        assert!(!lm_is_amnestic(3, 0).unwrap());
        assert!(lm_is_amnestic(-1, 10).is_err());
        assert!(lm_is_amnestic(3, -1).is_err());
    }

    #[test]
    fn biomarker_status_examples() {
        let p = BiomarkerPanel { amyloid_suvr: Some(1.6), tau_suvr: Some(1.4), ..panel() };
        assert_eq!(ad_biomarker_status(&p), BiomarkerStatus::Positive);
        let p = BiomarkerPanel { cerad: Some(1), braak: Some(1), ..panel() };
        assert_eq!(ad_biomarker_status(&p), BiomarkerStatus::Negative);
        assert_eq!(ad_biomarker_status(&panel()), BiomarkerStatus::Indeterminate);
    }

    #[test]
    fn amyloid_without_tau_falls_through() {
        let p = BiomarkerPanel { amyloid_suvr: Some(1.9), ..panel() };
        assert_eq!(ad_biomarker_status(&p), BiomarkerStatus::Indeterminate);
        let p = BiomarkerPanel { amyloid_suvr: Some(1.9), csf_abeta42: Some(900.0), csf_ttau: Some(200.0), csf_ptau: Some(20.0), ..panel() };
        assert_eq!(ad_biomarker_status(&p), BiomarkerStatus::Negative);
    }

    #[test]
    fn partial_csf_is_not_negative() {
        let p = BiomarkerPanel { csf_abeta42: Some(900.0), csf_ttau: Some(200.0), ..panel() };
        assert_eq!(ad_biomarker_status(&p), BiomarkerStatus::Indeterminate);
    }

    #[test]
    fn positive_wins_conflict_and_is_audited() {
        let p = BiomarkerPanel {
            amyloid_suvr: Some(1.6),
            tau_suvr: Some(1.4),
            csf_abeta42: Some(900.0),
            csf_ttau: Some(200.0),
            csf_ptau: Some(20.0),
            ..panel()
        };
        let (status, rules) = assess_biomarkers(&p);
        assert_eq!(status, BiomarkerStatus::Positive);
        assert!(rules.iter().any(|r| r.rule == "modality-conflict"));
    }

    fn record() -> SubjectRecord {
        SubjectRecord::new("s1", 70.0, crate::features::Sex::F, 16, 1.5e6)
    }

    #[test]
    fn tbi_excludes() {
        let mut r = record();
        r.tbi = true;
        r.panel = BiomarkerPanel { amyloid_suvr: Some(1.6), tau_suvr: Some(1.4), ..panel() };
        assert_eq!(assign_group(&r).unwrap().group, DiagnosticGroup::Excluded("tbi".into()));
    }

    #[test]
    fn positive_high_lm_is_atypical() {
        let mut r = record();
        r.panel = BiomarkerPanel { amyloid_suvr: Some(1.6), tau_suvr: Some(1.4), ..panel() };
        r.lm_score = Some(10);
        let a = assign_group(&r).unwrap();
        assert_eq!(a.group, DiagnosticGroup::Atad);
        assert!(!a.fired_rules.is_empty());
        r.lm_score = Some(8);
        assert_eq!(assign_group(&r).unwrap().group, DiagnosticGroup::Tad);
    }

    #[test]
    fn presentation_override_bypasses_lm() {
        let mut r = record();
        r.panel = BiomarkerPanel { csf_abeta42: Some(500.0), csf_ttau: Some(500.0), csf_ptau: Some(80.0), ..panel() };
        r.lm_score = None;
        r.presentation_override = Some(Presentation::NonAmnestic);
        assert_eq!(assign_group(&r).unwrap().group, DiagnosticGroup::Atad);
    }

    #[test]
    fn positive_without_lm_is_an_error() {
        let mut r = record();
        r.panel = BiomarkerPanel { amyloid_suvr: Some(1.6), tau_suvr: Some(1.4), ..panel() };
        assert!(matches!(assign_group(&r), Err(CohortError::IncompleteRecord { field: "lm_score", .. })));
    }

    #[test]
    fn negative_groups() {
        let mut r = record();
        r.panel = BiomarkerPanel { cerad: Some(0), braak: Some(1), ..panel() };
        r.impairment_diagnosis = true;
        assert_eq!(assign_group(&r).unwrap().group, DiagnosticGroup::NonAd);
        r.impairment_diagnosis = false;
        assert_eq!(assign_group(&r).unwrap().group, DiagnosticGroup::Cn);
        r.panel = panel();
        assert_eq!(assign_group(&r).unwrap().group, DiagnosticGroup::Excluded("indeterminate-biomarkers".into()));
    }

    #[test]
    fn group_names_round_trip() {
        for g in DiagnosticGroup::ANALYSIS.iter().cloned().chain([DiagnosticGroup::Excluded("tbi".into())]) {
            assert_eq!(g.to_string().parse::<DiagnosticGroup>().unwrap(), g);
        }
        assert!("Excluded()".parse::<DiagnosticGroup>().is_err());
    }
}
