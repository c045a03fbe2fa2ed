//! Subject CSV schema.
//!
//! One header row; empty cells are missing values. Columns are the
//! identity/demographic fields, the cognitive battery, the biomarker panel,
//! `etiv`, and any MRI columns from the naming scheme. Unknown columns are
//! rejected by name. Booleans are `0`/`1`; sex is `M`/`F`.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use super::record::MOCA_SUBSCORES;
use super::{FeatureError, FeatureNamingScheme, SubjectRecord};

pub const IDENTITY_COLUMNS: [&str; 10] = [
    "subject_id",
    "age",
    "sex",
    "education_years",
    "family_history",
    "tbi",
    "lm_score",
    "impairment_diagnosis",
    "initial_clinician_dx",
    "presentation_override",
];

pub const BATTERY_COLUMNS: [&str; 13] = [
    "moca_total",
    "moca_visuospatial_executive",
    "moca_naming",
    "moca_attention",
    "moca_language",
    "moca_abstraction",
    "moca_memory",
    "moca_orientation",
    "mmse_total",
    "tmt_a_sec",
    "tmt_b_sec",
    "animal_fluency",
    "bnt_total",
];

pub const BIOMARKER_COLUMNS: [&str; 7] = ["amyloid_suvr", "tau_suvr", "csf_abeta42", "csf_ttau", "csf_ptau", "cerad", "braak"];

const REQUIRED: [&str; 7] = ["subject_id", "age", "sex", "education_years", "tbi", "impairment_diagnosis", "etiv"];

/// Full column order used when writing.
pub fn subject_columns(scheme: &FeatureNamingScheme) -> Vec<String> {
    IDENTITY_COLUMNS
        .iter()
        .chain(BATTERY_COLUMNS.iter())
        .chain(BIOMARKER_COLUMNS.iter())
        .map(|s| s.to_string())
        .chain(std::iter::once("etiv".to_string()))
        .chain(scheme.all_mri().cloned())
        .collect()
}

fn is_known(name: &str, scheme: &FeatureNamingScheme) -> bool {
    IDENTITY_COLUMNS.contains(&name)
        || BATTERY_COLUMNS.contains(&name)
        || BIOMARKER_COLUMNS.contains(&name)
        || name == "etiv"
        || scheme.is_mri(name)
}

pub fn parse_subject_table(path: &Path, scheme: &FeatureNamingScheme) -> Result<Vec<SubjectRecord>, FeatureError> {
    let file = File::open(path).map_err(|e| FeatureError::Io { path: path.display().to_string(), message: e.to_string() })?;
    read_subject_table(file, scheme)
}

struct Row<'a> {
    index: &'a HashMap<String, usize>,
    record: &'a csv::StringRecord,
    line: usize,
}

impl Row<'_> {
    fn cell(&self, column: &str) -> Option<&str> {
        let i = *self.index.get(column)?;
        self.record.get(i).map(str::trim).filter(|s| !s.is_empty())
    }

    fn err(&self, column: &str, value: &str) -> FeatureError {
        FeatureError::OutOfRange { column: column.to_string(), value: value.to_string(), row: self.line }
    }

    fn parse<T: FromStr>(&self, column: &str) -> Result<Option<T>, FeatureError> {
        match self.cell(column) {
            None => Ok(None),
            Some(s) => s.parse::<T>().map(Some).map_err(|_| self.err(column, s)),
        }
    }

    fn required<T: FromStr>(&self, column: &str) -> Result<T, FeatureError> {
        self.parse(column)?.ok_or_else(|| self.err(column, ""))
    }

    /// Finite float within `[lo, hi]`.
    fn float(&self, column: &str, lo: f64, hi: f64) -> Result<Option<f64>, FeatureError> {
        match self.parse::<f64>(column)? {
            Some(v) if v.is_finite() && v >= lo && v <= hi => Ok(Some(v)),
            Some(v) => Err(self.err(column, &v.to_string())),
            None => Ok(None),
        }
    }

    fn flag(&self, column: &str) -> Result<Option<bool>, FeatureError> {
        match self.cell(column) {
            None => Ok(None),
            Some("0") => Ok(Some(false)),
            Some("1") => Ok(Some(true)),
            Some(s) => Err(self.err(column, s)),
        }
    }

    fn required_flag(&self, column: &str) -> Result<bool, FeatureError> {
        self.flag(column)?.ok_or_else(|| self.err(column, ""))
    }
}

pub fn read_subject_table<R: Read>(reader: R, scheme: &FeatureNamingScheme) -> Result<Vec<SubjectRecord>, FeatureError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| FeatureError::Csv(e.to_string()))?.clone();
    let mut index = HashMap::new();
    for (i, h) in headers.iter().enumerate() {
        let h = h.trim();
        if !is_known(h, scheme) {
            return Err(FeatureError::UnknownColumn(h.to_string()));
        }
        if index.insert(h.to_string(), i).is_some() {
            return Err(FeatureError::DuplicateColumn(h.to_string()));
        }
    }
    for r in REQUIRED {
        if !index.contains_key(r) {
            return Err(FeatureError::MissingColumn(r.to_string()));
        }
    }
    let mri_columns: Vec<(&String, usize)> =
        scheme.all_mri().filter_map(|n| index.get(n.as_str()).map(|&i| (n, i))).collect();

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| FeatureError::Csv(e.to_string()))?;
        let row = Row { index: &index, record: &rec, line: i + 2 };
        let subject_id: String = row.required("subject_id")?;
        if !seen.insert(subject_id.clone()) {
            return Err(FeatureError::DuplicateSubject(subject_id));
        }
        let age = row.float("age", 0.0, 130.0)?.ok_or_else(|| row.err("age", ""))?;
        let sex = row.required("sex").map_err(|_| row.err("sex", row.cell("sex").unwrap_or("")))?;
        let education_years: u32 = row.required("education_years")?;
        if education_years > 40 {
            return Err(row.err("education_years", &education_years.to_string()));
        }
        let etiv = row.float("etiv", f64::MIN_POSITIVE, f64::INFINITY)?.ok_or_else(|| row.err("etiv", ""))?;

        let mut r = SubjectRecord::new(subject_id, age, sex, education_years, etiv);
        r.family_history = row.flag("family_history")?;
        r.tbi = row.required_flag("tbi")?;
        r.lm_score = row.parse("lm_score")?;
        if let Some(lm) = r.lm_score {
            if lm > 50 {
                return Err(row.err("lm_score", &lm.to_string()));
            }
        }
        r.impairment_diagnosis = row.required_flag("impairment_diagnosis")?;
        r.initial_clinician_dx = row.parse("initial_clinician_dx")?;
        r.presentation_override = row.parse("presentation_override")?;

        let b = &mut r.battery;
        b.moca_total = row.float("moca_total", 0.0, 30.0)?;
        for (slot, (name, max)) in b.moca_subscores.iter_mut().zip(MOCA_SUBSCORES) {
            *slot = row.float(&format!("moca_{name}"), 0.0, max)?;
        }
        b.mmse_total = row.float("mmse_total", 0.0, 30.0)?;
        b.tmt_a = row.float("tmt_a_sec", f64::MIN_POSITIVE, f64::INFINITY)?;
        b.tmt_b = row.float("tmt_b_sec", f64::MIN_POSITIVE, f64::INFINITY)?;
        b.animal_fluency = row.float("animal_fluency", 0.0, f64::INFINITY)?;
        b.bnt_total = row.float("bnt_total", 0.0, 60.0)?;

        let p = &mut r.panel;
        p.amyloid_suvr = row.float("amyloid_suvr", 0.0, f64::INFINITY)?;
        p.tau_suvr = row.float("tau_suvr", 0.0, f64::INFINITY)?;
        p.csf_abeta42 = row.float("csf_abeta42", 0.0, f64::INFINITY)?;
        p.csf_ttau = row.float("csf_ttau", 0.0, f64::INFINITY)?;
        p.csf_ptau = row.float("csf_ptau", 0.0, f64::INFINITY)?;
        p.cerad = row.parse("cerad")?;
        p.braak = row.parse("braak")?;
        r.panel.validate().map_err(|e| match e {
            crate::cohort::CohortError::InvalidValue { field, value } => row.err(field, &value),
            other => FeatureError::Csv(other.to_string()),
        })?;

        for &(name, i) in &mri_columns {
            if let Some(s) = rec.get(i).map(str::trim).filter(|s| !s.is_empty()) {
                let v: f64 = s.parse().map_err(|_| row.err(name, s))?;
                if !v.is_finite() {
                    return Err(row.err(name, s));
                }
                r.mri.insert(name.clone(), v);
            }
        }
        records.push(r);
    }
    Ok(records)
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn flag(v: bool) -> String {
    if v { "1" } else { "0" }.to_string()
}

/// Write records with every known column. Floats use the shortest
/// representation that parses back to the same bits.
pub fn write_subject_table<W: Write>(
    records: &[SubjectRecord],
    scheme: &FeatureNamingScheme,
    writer: W,
) -> Result<(), FeatureError> {
    let mut w = csv::Writer::from_writer(writer);
    let columns = subject_columns(scheme);
    w.write_record(&columns).map_err(|e| FeatureError::Csv(e.to_string()))?;
    for r in records {
        let b = &r.battery;
        let p = &r.panel;
        let mut row: Vec<String> = vec![
            r.subject_id.clone(),
            r.age.to_string(),
            r.sex.to_string(),
            r.education_years.to_string(),
            opt(r.family_history.map(flag)),
            flag(r.tbi),
            opt(r.lm_score),
            flag(r.impairment_diagnosis),
            opt(r.initial_clinician_dx),
            opt(r.presentation_override),
            opt(b.moca_total),
        ];
        row.extend(b.moca_subscores.iter().map(|v| opt(*v)));
        row.extend([b.mmse_total, b.tmt_a, b.tmt_b, b.animal_fluency, b.bnt_total].map(opt));
        row.extend([p.amyloid_suvr, p.tau_suvr, p.csf_abeta42, p.csf_ttau, p.csf_ptau].map(opt));
        row.push(opt(p.cerad));
        row.push(opt(p.braak));
        row.push(r.etiv.to_string());
        row.extend(scheme.all_mri().map(|n| opt(r.mri.get(n))));
        w.write_record(&row).map_err(|e| FeatureError::Csv(e.to_string()))?;
    }
    w.flush().map_err(|e| FeatureError::Csv(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scheme() -> FeatureNamingScheme {
        FeatureNamingScheme::default()
    }

    const HEADER: &str = "subject_id,age,sex,education_years,tbi,impairment_diagnosis,etiv,moca_total,lh_hippocampus_volume";

    #[test]
    fn three_rows() {
        let csv = format!("{HEADER}\ns1,70,F,16,0,1,1500000,22,3500.5\ns2,65.5,M,12,0,0,1400000,,3600\ns3,80,M,8,1,1,1450000,18,\n");
        let recs = read_subject_table(csv.as_bytes(), &scheme()).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[0].battery.moca_total, Some(22.0));
        assert_eq!(recs[1].battery.moca_total, None);
        assert!(recs[2].tbi);
        assert!(!recs[2].mri.contains_key("lh_hippocampus_volume"));
        assert_eq!(recs[0].mri["lh_hippocampus_volume"], 3500.5);
    }

    #[test]
    fn typo_column_is_named() {
        let csv = "subject_id,age,sex,education_years,tbi,impairment_diagnosis,etiv,lh_hipocampus_volume\n";
        match read_subject_table(csv.as_bytes(), &scheme()) {
            Err(FeatureError::UnknownColumn(c)) => assert_eq!(c, "lh_hipocampus_volume"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn out_of_range_and_duplicates() {
        let bad_moca = format!("{HEADER}\ns1,70,F,16,0,1,1500000,31,\n");
        assert!(matches!(
            read_subject_table(bad_moca.as_bytes(), &scheme()),
            Err(FeatureError::OutOfRange { ref column, row: 2, .. }) if column == "moca_total"
        ));
        let bad_age = format!("{HEADER}\ns1,131,F,16,0,1,1500000,,\n");
        assert!(read_subject_table(bad_age.as_bytes(), &scheme()).is_err());
        let bad_etiv = format!("{HEADER}\ns1,70,F,16,0,1,0,,\n");
        assert!(read_subject_table(bad_etiv.as_bytes(), &scheme()).is_err());
        let dup = format!("{HEADER}\ns1,70,F,16,0,1,1500000,,\ns1,71,F,16,0,1,1500000,,\n");
        assert!(matches!(read_subject_table(dup.as_bytes(), &scheme()), Err(FeatureError::DuplicateSubject(_))));
        let missing = "subject_id,age,sex\n";
        assert!(matches!(read_subject_table(missing.as_bytes(), &scheme()), Err(FeatureError::MissingColumn(_))));
        let bad_braak = "subject_id,age,sex,education_years,tbi,impairment_diagnosis,etiv,braak\ns1,70,F,16,0,1,1500000,7\n";
        assert!(read_subject_table(bad_braak.as_bytes(), &scheme()).is_err());
    }
}
