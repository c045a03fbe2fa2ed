//! Synthetic cohorts with planted ground truth.
//!
//! Each MRI feature of a CN subject is a linear function of age, sex and TIV
//! plus Gaussian noise. Subjects in other groups lose `delta · noise_sd` on
//! the features planted for their group, so after normalization against CN
//! their mean z-score on that feature is `delta`. Biomarker panels, memory
//! scores and impairment flags are drawn so that the cohort rules assign
//! every subject to the group it was generated for.
//!
//! Generation consumes one sequential random stream, so a seed fixes the
//! output byte for byte.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boruta::{direction_from_means, Direction};
use crate::cohort::{
    self, lm_cutoff, BiomarkerPanel, DiagnosticGroup, AMYLOID_SUVR_POSITIVE, CSF_ABETA42_BELOW, CSF_PTAU_ABOVE,
    CSF_TTAU_ABOVE, TAU_SUVR_POSITIVE,
};
use crate::features::{
    ClinicianDx, CognitiveBattery, FeatureNamingScheme, Measure, RegionFeature, Sex, SubjectRecord,
    LH_HIPPOCAMPUS_VOLUME, MOCA_SUBSCORES, RH_HIPPOCAMPUS_VOLUME, TOTAL_HIPPOCAMPUS_VOLUME,
};
use crate::rng;

pub const TRUTH_SCHEMA_VERSION: u32 = 1;
/// Fraction by which non-boundary biomarker draws stay clear of a threshold.
const MARGIN: f64 = 0.05;
const LM_MAX: u32 = 25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("`{0}` is not a regional MRI feature")]
    InvalidFeature(String),
    #[error("`{0}` is not a generated group (expected tAD, atAD, nonAD or CN)")]
    InvalidGroup(String),
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureBaseline {
    pub alpha: f64,
    pub beta_age: f64,
    pub beta_sex: f64,
    pub beta_tiv: f64,
    pub noise_sd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreDist {
    pub mean: f64,
    pub sd: f64,
}

impl ScoreDist {
    const fn new(mean: f64, sd: f64) -> Self {
        Self { mean, sd }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CognitiveProfile {
    pub moca: ScoreDist,
    pub mmse: ScoreDist,
    pub tmt_a: ScoreDist,
    pub tmt_b: ScoreDist,
    pub animal_fluency: ScoreDist,
    pub bnt: ScoreDist,
    /// Probability that the initial clinical impression is AD.
    pub clinician_ad_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    /// Subjects per group, keyed `tAD`, `atAD`, `nonAD`, `CN`.
    pub group_sizes: BTreeMap<String, usize>,
    pub age_range: (f64, f64),
    pub female_fraction: f64,
    /// Estimated total intracranial volume range, mm³.
    pub tiv_range: (f64, f64),
    pub education_range: (u32, u32),
    pub baselines: BTreeMap<String, FeatureBaseline>,
    /// Group → feature → delta in units of the feature's noise SD.
    pub planted_effects: BTreeMap<String, BTreeMap<String, f64>>,
    pub cognition: BTreeMap<String, CognitiveProfile>,
    /// Place biomarkers exactly on their thresholds instead of clear of them.
    #[serde(default)]
    pub boundary: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedFeature {
    pub feature: String,
    /// For the contrast's first group.
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedTruth {
    pub schema_version: u32,
    pub seed: u64,
    /// `A:B` → features whose planted deltas differ between A and B, sorted by name.
    pub contrasts: BTreeMap<String, Vec<PlantedFeature>>,
}

impl PlantedTruth {
    pub fn for_contrast(&self, first: &str, second: &str) -> Option<&[PlantedFeature]> {
        self.contrasts.get(&format!("{first}:{second}")).map(Vec::as_slice)
    }
}

/// Generation order of the groups.
const GROUPS: [&str; 4] = ["tAD", "atAD", "nonAD", "CN"];

fn group_of(name: &str) -> Result<DiagnosticGroup, SynthError> {
    match name.parse::<DiagnosticGroup>() {
        Ok(g) if !g.is_excluded() => Ok(g),
        _ => Err(SynthError::InvalidGroup(name.into())),
    }
}

/// Typical magnitude of a measure at age 70 and TIV 1.5·10⁶ mm³.
fn typical_size(feature: &RegionFeature, index: usize) -> f64 {
    // golden-ratio spread keeps neighbouring regions at different sizes
    let spread = 0.6 + 0.8 * ((index as f64 * 0.618_033_988_75).fract());
    match feature.measure {
        Measure::Volume if feature.region == crate::features::HIPPOCAMPUS => 3800.0,
        Measure::Volume => 8000.0 * spread,
        Measure::Thickness => 2.6 * (0.85 + 0.3 * spread / 1.4),
        Measure::Area => 2500.0 * spread,
    }
}

fn default_baselines() -> BTreeMap<String, FeatureBaseline> {
    let scheme = FeatureNamingScheme::default();
    scheme
        .regional()
        .enumerate()
        .map(|(i, name)| {
            let rf: RegionFeature = name.parse().expect("scheme names parse");
            let m = typical_size(&rf, i);
            let tiv_share = match rf.measure {
                Measure::Thickness => 0.1,
                _ => 0.6,
            };
            let beta_age = -0.004 * m;
            let beta_sex = -0.02 * m;
            let beta_tiv = tiv_share * m / 1.5e6;
            let alpha = m - beta_age * 70.0 - beta_sex * 0.5 - beta_tiv * 1.5e6;
            (name.clone(), FeatureBaseline { alpha, beta_age, beta_sex, beta_tiv, noise_sd: 0.08 * m })
        })
        .collect()
}

fn effects(items: &[(&str, f64)]) -> BTreeMap<String, f64> {
    items.iter().map(|&(n, d)| (n.to_string(), d)).collect()
}

fn default_cognition() -> BTreeMap<String, CognitiveProfile> {
    let p = |moca, mmse, a, b, fl, bnt, rate| CognitiveProfile {
        moca,
        mmse,
        tmt_a: a,
        tmt_b: b,
        animal_fluency: fl,
        bnt,
        clinician_ad_rate: rate,
    };
    let s = ScoreDist::new;
    BTreeMap::from([
        ("tAD".into(), p(s(19.0, 3.0), s(22.0, 3.0), s(55.0, 15.0), s(160.0, 50.0), s(12.0, 4.0), s(48.0, 7.0), 0.92)),
        ("atAD".into(), p(s(18.0, 3.5), s(21.0, 3.5), s(70.0, 20.0), s(200.0, 50.0), s(11.0, 4.0), s(45.0, 8.0), 0.40)),
        ("nonAD".into(), p(s(21.0, 3.0), s(24.0, 3.0), s(50.0, 15.0), s(140.0, 45.0), s(13.0, 4.0), s(50.0, 6.0), 0.15)),
        ("CN".into(), p(s(27.0, 1.5), s(29.0, 1.0), s(30.0, 8.0), s(75.0, 20.0), s(21.0, 5.0), s(56.0, 3.0), 0.0)),
    ])
}

impl SynthConfig {
    /// Covariates, baselines and cognition at their defaults; no subjects and
    /// no planted effects.
    pub fn empty(seed: u64) -> Self {
        Self {
            group_sizes: GROUPS.iter().map(|g| (g.to_string(), 0)).collect(),
            age_range: (55.0, 90.0),
            female_fraction: 0.5,
            tiv_range: (1.2e6, 1.8e6),
            education_range: (6, 20),
            baselines: default_baselines(),
            planted_effects: BTreeMap::new(),
            cognition: default_cognition(),
            boundary: false,
            seed,
        }
    }

    pub fn size(&self, group: &str) -> usize {
        self.group_sizes.get(group).copied().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let scheme = FeatureNamingScheme::default();
        for g in self.group_sizes.keys().chain(self.planted_effects.keys()).chain(self.cognition.keys()) {
            group_of(g)?;
        }
        for (g, &n) in &self.group_sizes {
            if n > 0 && !self.cognition.contains_key(g) {
                return Err(SynthError::InvalidConfig(format!("no cognitive profile for {g}")));
            }
        }
        for (name, b) in &self.baselines {
            if !scheme.regional().any(|n| n == name) {
                return Err(SynthError::InvalidFeature(name.clone()));
            }
            if !(b.noise_sd > 0.0 && b.noise_sd.is_finite()) {
                return Err(SynthError::InvalidConfig(format!("noise_sd for {name} must be positive")));
            }
        }
        for map in self.planted_effects.values() {
            for (name, delta) in map {
                if !self.baselines.contains_key(name) {
                    return Err(SynthError::InvalidFeature(name.clone()));
                }
                if !delta.is_finite() {
                    return Err(SynthError::InvalidConfig(format!("delta for {name} must be finite")));
                }
            }
        }
        if self.planted_effects.get("CN").is_some_and(|m| m.values().any(|&d| d != 0.0)) {
            return Err(SynthError::InvalidConfig("CN is the reference group and cannot carry effects".into()));
        }
        let ordered = |(a, b): (f64, f64)| a.is_finite() && b.is_finite() && a <= b;
        if !ordered(self.age_range) || !ordered(self.tiv_range) || self.tiv_range.0 <= 0.0 {
            return Err(SynthError::InvalidConfig("covariate ranges must be finite and ordered".into()));
        }
        if self.education_range.0 > self.education_range.1 {
            return Err(SynthError::InvalidConfig("education range must be ordered".into()));
        }
        if !(0.0..=1.0).contains(&self.female_fraction) {
            return Err(SynthError::InvalidConfig("female_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }

    fn delta(&self, group: &str, feature: &str) -> f64 {
        self.planted_effects.get(group).and_then(|m| m.get(feature)).copied().unwrap_or(0.0)
    }

    /// Features whose deltas differ between every ordered pair of groups.
    pub fn truth(&self) -> PlantedTruth {
        let mut contrasts = BTreeMap::new();
        for a in GROUPS {
            for b in GROUPS {
                if a == b {
                    continue;
                }
                let list = self
                    .baselines
                    .keys()
                    .filter_map(|f| {
                        let (da, db) = (self.delta(a, f), self.delta(b, f));
                        (da != db).then(|| PlantedFeature { feature: f.clone(), direction: direction_from_means(da, db) })
                    })
                    .collect();
                contrasts.insert(format!("{a}:{b}"), list);
            }
        }
        PlantedTruth { schema_version: TRUTH_SCHEMA_VERSION, seed: self.seed, contrasts }
    }
}

/// ADNI-sized groups with atrophy motifs per presentation: medial temporal for
/// tAD, posterior parietal for atAD, and a partly overlapping limbic/insular
/// set for nonAD. Hippocampal volume is planted for tAD but spared in atAD.
pub fn default_cohort_config(seed: u64) -> SynthConfig {
    let mut config = SynthConfig::empty(seed);
    config.group_sizes =
        BTreeMap::from([("tAD".into(), 144), ("atAD".into(), 87), ("nonAD".into(), 137), ("CN".into(), 421)]);
    config.planted_effects = BTreeMap::from([
        (
            "tAD".into(),
            effects(&[
                (LH_HIPPOCAMPUS_VOLUME, 2.0),
                (RH_HIPPOCAMPUS_VOLUME, 2.0),
                ("lh_entorhinal_thickness", 2.0),
                ("rh_entorhinal_thickness", 2.0),
                ("lh_middletemporal_volume", 1.5),
                ("rh_middletemporal_volume", 1.5),
                ("lh_inferiortemporal_thickness", 1.5),
                ("rh_rostralmiddlefrontal_thickness", -1.0),
            ]),
        ),
        (
            "atAD".into(),
            effects(&[
                ("lh_precuneus_thickness", 2.0),
                ("rh_precuneus_thickness", 2.0),
                ("lh_superiorparietal_volume", 2.0),
                ("rh_superiorparietal_volume", 2.0),
                ("lh_inferiorparietal_thickness", 2.0),
                ("rh_inferiorparietal_thickness", 2.0),
                ("lh_fusiform_volume", 1.5),
            ]),
        ),
        (
            "nonAD".into(),
            effects(&[
                (LH_HIPPOCAMPUS_VOLUME, 2.0),
                (RH_HIPPOCAMPUS_VOLUME, 2.0),
                ("lh_entorhinal_volume", 2.0),
                ("rh_entorhinal_volume", 2.0),
                ("rh_parahippocampal_thickness", 2.0),
                ("lh_insula_volume", 2.0),
                ("lh_fusiform_volume", 1.5),
            ]),
        ),
    ]);
    config
}

fn uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

fn normal<R: Rng>(rng: &mut R, d: ScoreDist) -> f64 {
    Normal::new(d.mean, d.sd.max(0.0)).map(|n| n.sample(rng)).unwrap_or(d.mean)
}

fn score<R: Rng>(rng: &mut R, d: ScoreDist, lo: f64, hi: f64) -> f64 {
    normal(rng, d).round().clamp(lo, hi)
}

fn biomarkers<R: Rng>(rng: &mut R, positive: bool, boundary: bool) -> BiomarkerPanel {
    let above = |rng: &mut R, t: f64, hi: f64| uniform(rng, (t * (1.0 + MARGIN), hi));
    let below = |rng: &mut R, lo: f64, t: f64| uniform(rng, (lo, t * (1.0 - MARGIN)));
    let mut p = BiomarkerPanel::default();
    if positive {
        p.amyloid_suvr = Some(if boundary { AMYLOID_SUVR_POSITIVE } else { above(rng, AMYLOID_SUVR_POSITIVE, 2.5) });
        p.tau_suvr = Some(if boundary { TAU_SUVR_POSITIVE } else { above(rng, TAU_SUVR_POSITIVE, 2.5) });
        p.csf_abeta42 = Some(below(rng, 300.0, CSF_ABETA42_BELOW));
        p.csf_ttau = Some(above(rng, CSF_TTAU_ABOVE, 900.0));
        p.csf_ptau = Some(above(rng, CSF_PTAU_ABOVE, 120.0));
    } else {
        p.amyloid_suvr = Some(below(rng, 0.9, AMYLOID_SUVR_POSITIVE));
        p.tau_suvr = Some(below(rng, 0.9, TAU_SUVR_POSITIVE));
        if boundary {
            p.csf_abeta42 = Some(CSF_ABETA42_BELOW);
            p.csf_ttau = Some(CSF_TTAU_ABOVE);
            p.csf_ptau = Some(CSF_PTAU_ABOVE);
        } else {
            p.csf_abeta42 = Some(above(rng, CSF_ABETA42_BELOW, 1500.0));
            p.csf_ttau = Some(below(rng, 150.0, CSF_TTAU_ABOVE));
            p.csf_ptau = Some(below(rng, 15.0, CSF_PTAU_ABOVE));
        }
    }
    p
}

/// Split a MoCA total across the subscores by removing points at random.
fn moca_subscores<R: Rng>(rng: &mut R, total: f64) -> [Option<f64>; 7] {
    let mut sub: Vec<f64> = MOCA_SUBSCORES.iter().map(|&(_, max)| max).collect();
    let mut deficit = (30.0 - total) as usize;
    while deficit > 0 {
        let open: Vec<usize> = (0..sub.len()).filter(|&i| sub[i] > 0.0).collect();
        let i = open[rng.gen_range(0..open.len())];
        sub[i] -= 1.0;
        deficit -= 1;
    }
    let mut out = [None; 7];
    out.iter_mut().zip(sub).for_each(|(o, v)| *o = Some(v));
    out
}

fn battery<R: Rng>(rng: &mut R, p: &CognitiveProfile) -> CognitiveBattery {
    let moca = score(rng, p.moca, 0.0, 30.0);
    CognitiveBattery {
        moca_total: Some(moca),
        moca_subscores: moca_subscores(rng, moca),
        mmse_total: Some(score(rng, p.mmse, 0.0, 30.0)),
        tmt_a: Some(normal(rng, p.tmt_a).clamp(10.0, 150.0)),
        tmt_b: Some(normal(rng, p.tmt_b).clamp(30.0, 300.0)),
        animal_fluency: Some(score(rng, p.animal_fluency, 0.0, 40.0)),
        bnt_total: Some(score(rng, p.bnt, 0.0, 60.0)),
    }
}

fn memory_score<R: Rng>(rng: &mut R, group: &DiagnosticGroup, education: u32) -> u32 {
    let cutoff = lm_cutoff(education);
    match group {
        DiagnosticGroup::Tad => rng.gen_range(0..cutoff),
        DiagnosticGroup::Atad => (cutoff + rng.gen_range(0..5)).min(LM_MAX),
        DiagnosticGroup::Cn => (cutoff + rng.gen_range(0..11)).min(LM_MAX),
        _ => rng.gen_range(0..=LM_MAX),
    }
}

pub fn generate_cohort(config: &SynthConfig) -> Result<(Vec<SubjectRecord>, PlantedTruth), SynthError> {
    config.validate()?;
    let mut rng = rng::substream(config.seed, 0);
    let mut records = Vec::new();
    for name in GROUPS {
        let group = group_of(name)?;
        let Some(profile) = config.cognition.get(name) else { continue };
        let impaired = group != DiagnosticGroup::Cn;
        let ad = matches!(group, DiagnosticGroup::Tad | DiagnosticGroup::Atad);
        for _ in 0..config.size(name) {
            let id = format!("SYN{:05}", records.len() + 1);
            let age = uniform(&mut rng, config.age_range);
            let sex = if rng.gen_bool(config.female_fraction) { Sex::F } else { Sex::M };
            let tiv = uniform(&mut rng, config.tiv_range);
            let education = rng.gen_range(config.education_range.0..=config.education_range.1);
            let mut r = SubjectRecord::new(id, age, sex, education, tiv);
            r.family_history = Some(rng.gen_bool(if ad { 0.4 } else { 0.2 }));
            r.lm_score = Some(memory_score(&mut rng, &group, education));
            r.impairment_diagnosis = impaired;
            if impaired {
                r.initial_clinician_dx =
                    Some(if rng.gen_bool(profile.clinician_ad_rate) { ClinicianDx::Ad } else { ClinicianDx::NonAd });
            }
            r.panel = biomarkers(&mut rng, ad, config.boundary);
            r.battery = battery(&mut rng, profile);
            for (feature, b) in &config.baselines {
                let mean = b.alpha + b.beta_age * age + b.beta_sex * sex.code() + b.beta_tiv * tiv;
                let noise = Normal::new(0.0, b.noise_sd).expect("validated noise_sd").sample(&mut rng);
                let value = mean + noise - config.delta(name, feature) * b.noise_sd;
                r.mri.insert(feature.clone(), value);
            }
            if let (Some(l), Some(h)) = (r.mri.get(LH_HIPPOCAMPUS_VOLUME), r.mri.get(RH_HIPPOCAMPUS_VOLUME)) {
                let total = l + h;
                r.mri.insert(TOTAL_HIPPOCAMPUS_VOLUME.into(), total);
            }
            debug_assert_eq!(cohort::assign_group(&r).map(|a| a.group).ok(), Some(group.clone()));
            records.push(r);
        }
    }
    Ok((records, config.truth()))
}
