use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cohort::BiomarkerPanel;

use super::FeatureError;

/// Encoded as 0 (M) / 1 (F) in regression designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sex {
    M,
    F,
}

impl Sex {
    pub fn code(self) -> f64 {
        match self {
            Sex::M => 0.0,
            Sex::F => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClinicianDx {
    #[serde(rename = "AD")]
    Ad,
    #[serde(rename = "nonAD")]
    NonAd,
}

/// Clinician-adjudicated presentation, used instead of the LM cutoff when set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Presentation {
    Amnestic,
    NonAmnestic,
}

macro_rules! text_enum {
    ($ty:ty, $field:literal, $($variant:path => $text:literal),+) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($variant => $text),+ })
            }
        }
        impl FromStr for $ty {
            type Err = FeatureError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($variant),)+
                    _ => Err(FeatureError::OutOfRange { column: $field.into(), value: s.into(), row: 0 }),
                }
            }
        }
    };
}

text_enum!(Sex, "sex", Sex::M => "M", Sex::F => "F");
text_enum!(ClinicianDx, "initial_clinician_dx", ClinicianDx::Ad => "AD", ClinicianDx::NonAd => "nonAD");
text_enum!(Presentation, "presentation_override", Presentation::Amnestic => "amnestic", Presentation::NonAmnestic => "non-amnestic");

/// MoCA sub-scores with their instrument maxima; they sum to the 30-point total.
pub const MOCA_SUBSCORES: [(&str, f64); 7] = [
    ("visuospatial_executive", 5.0),
    ("naming", 3.0),
    ("attention", 6.0),
    ("language", 3.0),
    ("abstraction", 2.0),
    ("memory", 5.0),
    ("orientation", 6.0),
];

/// Cognitive battery. Trail Making deficiency cutoffs (A ≥ 78 s, B ≥ 273 s)
/// are clinical conventions only; raw times are used as features.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CognitiveBattery {
    pub moca_total: Option<f64>,
    /// Ordered as [`MOCA_SUBSCORES`].
    pub moca_subscores: [Option<f64>; 7],
    pub mmse_total: Option<f64>,
    pub tmt_a: Option<f64>,
    pub tmt_b: Option<f64>,
    pub animal_fluency: Option<f64>,
    pub bnt_total: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub subject_id: String,
    pub age: f64,
    pub sex: Sex,
    pub education_years: u32,
    pub family_history: Option<bool>,
    pub tbi: bool,
    pub lm_score: Option<u32>,
    pub impairment_diagnosis: bool,
    pub initial_clinician_dx: Option<ClinicianDx>,
    pub presentation_override: Option<Presentation>,
    pub battery: CognitiveBattery,
    pub panel: BiomarkerPanel,
    /// Estimated total intracranial volume, mm³.
    pub etiv: f64,
    pub mri: BTreeMap<String, f64>,
}

impl SubjectRecord {
    pub fn new(subject_id: impl Into<String>, age: f64, sex: Sex, education_years: u32, etiv: f64) -> Self {
        Self {
            subject_id: subject_id.into(),
            age,
            sex,
            education_years,
            family_history: None,
            tbi: false,
            lm_score: None,
            impairment_diagnosis: false,
            initial_clinician_dx: None,
            presentation_override: None,
            battery: CognitiveBattery::default(),
            panel: BiomarkerPanel::default(),
            etiv,
            mri: BTreeMap::new(),
        }
    }

    /// Total hippocampal volume: stored value if present, else left + right.
    pub fn total_hippocampus_volume(&self) -> Option<f64> {
        self.mri.get(super::TOTAL_HIPPOCAMPUS_VOLUME).copied().or_else(|| {
            Some(self.mri.get(super::LH_HIPPOCAMPUS_VOLUME)? + self.mri.get(super::RH_HIPPOCAMPUS_VOLUME)?)
        })
    }
}
