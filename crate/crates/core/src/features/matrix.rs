use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::record::MOCA_SUBSCORES;
use super::{FeatureError, FeatureNamingScheme, SubjectRecord, TOTAL_HIPPOCAMPUS_VOLUME};
use crate::scalar::Scalar;

/// Subject-major numeric grid with an explicit missing mask.
/// Missing cells hold NaN; observed cells are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub column_names: Vec<String>,
    pub values: Array2<f64>,
    pub missing: Array2<bool>,
    pub row_ids: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(
        column_names: Vec<String>,
        values: Array2<f64>,
        missing: Array2<bool>,
        row_ids: Vec<String>,
    ) -> Result<Self, FeatureError> {
        let (n, p) = values.dim();
        if missing.dim() != (n, p) || column_names.len() != p || row_ids.len() != n {
            return Err(FeatureError::ShapeMismatch);
        }
        let mut seen = HashSet::new();
        for c in &column_names {
            if !seen.insert(c) {
                return Err(FeatureError::DuplicateColumn(c.clone()));
            }
        }
        for ((v, m), j) in values.iter().zip(missing.iter()).zip((0..n * p).map(|k| k % p.max(1))) {
            if !*m && !v.is_finite() {
                return Err(FeatureError::NonFinite(column_names[j].clone()));
            }
        }
        Ok(Self { column_names, values, missing, row_ids })
    }

    /// Fully observed matrix.
    pub fn from_dense(column_names: Vec<String>, values: Array2<f64>, row_ids: Vec<String>) -> Result<Self, FeatureError> {
        let missing = Array2::from_elem(values.dim(), false);
        Self::new(column_names, values, missing, row_ids)
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn has_missing(&self) -> bool {
        self.missing.iter().any(|&m| m)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            column_names: self.column_names.clone(),
            values: self.values.select(Axis(0), rows),
            missing: self.missing.select(Axis(0), rows),
            row_ids: rows.iter().map(|&i| self.row_ids[i].clone()).collect(),
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            column_names: cols.iter().map(|&j| self.column_names[j].clone()).collect(),
            values: self.values.select(Axis(1), cols),
            missing: self.missing.select(Axis(1), cols),
            row_ids: self.row_ids.clone(),
        }
    }

    /// Numeric grid in the estimator scalar type; fails if any cell is missing.
    pub fn to_dense<T: Scalar>(&self) -> Result<Array2<T>, FeatureError> {
        if let Some((idx, _)) = self.missing.indexed_iter().find(|(_, &m)| m) {
            return Err(FeatureError::MissingCells(self.column_names[idx.1].clone()));
        }
        Ok(self.values.mapv(T::of))
    }
}

/// Column sets for the ablation experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureSet {
    #[serde(rename = "clinical")]
    Clinical,
    #[serde(rename = "hippo")]
    HippoOnly,
    #[serde(rename = "hippo+clinical")]
    HippoPlusClinical,
    #[serde(rename = "mri")]
    MriOnly,
    #[serde(rename = "mri+clinical")]
    MriPlusClinical,
    /// Cortical plus per-hemisphere hippocampal volumes; the brain-region view.
    #[serde(rename = "regions")]
    Regions,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 6] = [
        FeatureSet::Clinical,
        FeatureSet::HippoOnly,
        FeatureSet::HippoPlusClinical,
        FeatureSet::MriOnly,
        FeatureSet::MriPlusClinical,
        FeatureSet::Regions,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureSet::Clinical => "clinical",
            FeatureSet::HippoOnly => "hippo",
            FeatureSet::HippoPlusClinical => "hippo+clinical",
            FeatureSet::MriOnly => "mri",
            FeatureSet::MriPlusClinical => "mri+clinical",
            FeatureSet::Regions => "regions",
        }
    }

    pub fn valid_names() -> String {
        Self::ALL.iter().map(|f| f.name()).collect::<Vec<_>>().join(", ")
    }

    pub fn columns(self, scheme: &FeatureNamingScheme) -> Vec<String> {
        let clinical = || clinical_columns().into_iter();
        let hippo = || std::iter::once(TOTAL_HIPPOCAMPUS_VOLUME.to_string());
        match self {
            FeatureSet::Clinical => clinical().collect(),
            FeatureSet::HippoOnly => hippo().collect(),
            FeatureSet::HippoPlusClinical => hippo().chain(clinical()).collect(),
            FeatureSet::MriOnly => scheme.cortical().to_vec(),
            FeatureSet::MriPlusClinical => scheme.cortical().iter().cloned().chain(clinical()).collect(),
            FeatureSet::Regions => scheme.regional().cloned().collect(),
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureSet {
    type Err = FeatureError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| FeatureError::UnknownFeatureSet { name: s.to_string(), valid: Self::valid_names() })
    }
}

/// Age, education, family history, and every battery total and sub-score.
pub fn clinical_columns() -> Vec<String> {
    let mut cols = vec!["age".to_string(), "education_years".to_string(), "family_history".to_string(), "moca_total".to_string()];
    cols.extend(MOCA_SUBSCORES.iter().map(|(n, _)| format!("moca_{n}")));
    cols.extend(["mmse_total", "tmt_a_sec", "tmt_b_sec", "animal_fluency", "bnt_total"].map(String::from));
    cols
}

fn clinical_value(r: &SubjectRecord, column: &str) -> Option<f64> {
    let b = &r.battery;
    match column {
        "age" => Some(r.age),
        "education_years" => Some(r.education_years as f64),
        "family_history" => r.family_history.map(|f| if f { 1.0 } else { 0.0 }),
        "moca_total" => b.moca_total,
        "mmse_total" => b.mmse_total,
        "tmt_a_sec" => b.tmt_a,
        "tmt_b_sec" => b.tmt_b,
        "animal_fluency" => b.animal_fluency,
        "bnt_total" => b.bnt_total,
        other => {
            let sub = other.strip_prefix("moca_")?;
            let i = MOCA_SUBSCORES.iter().position(|(n, _)| *n == sub)?;
            b.moca_subscores[i]
        }
    }
}

/// Build the matrix for an ablation set; row order follows `records`.
pub fn assemble_matrix(
    records: &[SubjectRecord],
    feature_set: FeatureSet,
    scheme: &FeatureNamingScheme,
) -> Result<FeatureMatrix, FeatureError> {
    if records.is_empty() {
        return Err(FeatureError::EmptyRecords);
    }
    let columns = feature_set.columns(scheme);
    let clinical: HashSet<String> = clinical_columns().into_iter().collect();
    let (n, p) = (records.len(), columns.len());
    let mut values = Array2::from_elem((n, p), f64::NAN);
    let mut missing = Array2::from_elem((n, p), true);
    for (i, r) in records.iter().enumerate() {
        for (j, c) in columns.iter().enumerate() {
            let v = if clinical.contains(c) {
                clinical_value(r, c)
            } else if c == TOTAL_HIPPOCAMPUS_VOLUME {
                r.total_hippocampus_volume()
            } else {
                r.mri.get(c).copied()
            };
            if let Some(v) = v {
                values[[i, j]] = v;
                missing[[i, j]] = false;
            }
        }
    }
    FeatureMatrix::new(columns, values, missing, records.iter().map(|r| r.subject_id.clone()).collect())
}

/// Per-column medians learned from a training matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputerState {
    pub column_names: Vec<String>,
    pub medians: Vec<f64>,
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 { values[n / 2] } else { 0.5 * (values[n / 2 - 1] + values[n / 2]) })
}

pub fn fit_imputer(train: &FeatureMatrix) -> Result<ImputerState, FeatureError> {
    let medians = (0..train.n_cols())
        .map(|j| {
            let mut observed: Vec<f64> = train
                .values
                .column(j)
                .iter()
                .zip(train.missing.column(j))
                .filter(|(_, &m)| !m)
                .map(|(&v, _)| v)
                .collect();
            median(&mut observed).ok_or_else(|| FeatureError::UnimputableColumn(train.column_names[j].clone()))
        })
        .collect::<Result<_, _>>()?;
    Ok(ImputerState { column_names: train.column_names.clone(), medians })
}

/// Fill missing cells with the fitted medians; reads no statistics from `m`.
pub fn apply_imputer(state: &ImputerState, m: &FeatureMatrix) -> Result<FeatureMatrix, FeatureError> {
    if state.column_names != m.column_names {
        return Err(FeatureError::ShapeMismatch);
    }
    let mut out = m.clone();
    for ((i, j), miss) in m.missing.indexed_iter() {
        if *miss {
            out.values[[i, j]] = state.medians[j];
        }
    }
    out.missing.fill(false);
    Ok(out)
}
