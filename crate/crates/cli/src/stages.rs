//! Pipeline stages. Each stage reads its inputs from files and writes its
//! artifacts into the output directory, so stages compose through the
//! filesystem exactly as they do from the command line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use atlasforest::boruta::{boruta_run, direction_from_means, significant_regions, BorutaResult, RegionFinding};
use atlasforest::cohort::{assign_all, DiagnosticGroup};
use atlasforest::eval::{baseline_recall, nested_cv, CvReport};
use atlasforest::features::{
    assemble_matrix, parse_subject_table, write_subject_table, FeatureMatrix, FeatureNamingScheme, SubjectRecord,
    TOTAL_HIPPOCAMPUS_VOLUME,
};
use atlasforest::normalize::{normalize_matrix, Covariates, GlmModel, ZSign};
use atlasforest::synth::generate_cohort;
use ndarray::Array2;
use serde::Serialize;

use crate::config::{Contrast, PipelineConfig};
use crate::error::CliError;
use crate::io::{atomic_write, csv_bytes, read_groups, write_groups, write_json, write_roc};

pub const SCHEMA_VERSION: u32 = 1;

pub const SUBJECTS_CSV: &str = "subjects.csv";
pub const TRUTH_JSON: &str = "truth.json";
pub const GROUPS_CSV: &str = "groups.csv";
pub const AUDIT_JSON: &str = "audit.json";
pub const BASELINE_JSON: &str = "baseline_recall.json";
pub const ZSCORES_CSV: &str = "zscores.csv";
pub const GLM_JSON: &str = "glm_models.json";
pub const CV_JSON: &str = "cv_report.json";
pub const FINDINGS_JSON: &str = "findings.json";
pub const TRACE_CSV: &str = "boruta_trace.csv";
pub const DECISIONS_CSV: &str = "boruta_decisions.csv";

pub fn roc_file(fold: usize) -> String {
    format!("roc_fold{}.csv", fold + 1)
}

fn read_subjects(path: &Path) -> Result<Vec<SubjectRecord>, CliError> {
    let records = parse_subject_table(path, &FeatureNamingScheme::default())?;
    if records.is_empty() {
        return Err(CliError::Data { message: format!("{}: no subjects", path.display()), path: Some(path.display().to_string()) });
    }
    Ok(records)
}

/// Group of each record, in record order.
fn groups_for(records: &[SubjectRecord], groups_path: &Path) -> Result<Vec<DiagnosticGroup>, CliError> {
    let groups = read_groups(groups_path)?;
    records
        .iter()
        .map(|r| {
            groups.get(&r.subject_id).cloned().ok_or_else(|| {
                CliError::data(format!("subject `{}` has no row in {}", r.subject_id, groups_path.display()))
            })
        })
        .collect()
}

/// Records of the contrast's two groups with their 0/1 labels.
fn contrast_rows(
    records: Vec<SubjectRecord>,
    groups: &[DiagnosticGroup],
    contrast: &Contrast,
) -> Result<(Vec<SubjectRecord>, Vec<usize>), CliError> {
    let (rows, y): (Vec<_>, Vec<_>) =
        records.into_iter().zip(groups).filter_map(|(r, g)| contrast.label(g).map(|l| (r, l))).unzip();
    for (label, g) in [(1, &contrast.first), (0, &contrast.second)] {
        if !y.contains(&label) {
            return Err(CliError::data(format!("no {g} subjects for contrast {contrast}")));
        }
    }
    Ok((rows, y))
}

pub fn synth(cfg: &PipelineConfig, boundary: bool) -> Result<(PathBuf, PathBuf), CliError> {
    let mut sc = cfg.synth_config();
    sc.boundary |= boundary;
    let (records, truth) = generate_cohort(&sc)?;
    let mut buf = Vec::new();
    write_subject_table(&records, &FeatureNamingScheme::default(), &mut buf)?;
    let (subjects, truth_path) = (cfg.out.join(SUBJECTS_CSV), cfg.out.join(TRUTH_JSON));
    atomic_write(&subjects, &buf)?;
    write_json(&truth_path, &truth)?;
    log::info!("synthesized {} subjects into {}", records.len(), subjects.display());
    Ok((subjects, truth_path))
}

#[derive(Serialize)]
struct AuditEntry<'a> {
    subject_id: &'a str,
    group: String,
    rules: &'a [atlasforest::cohort::RuleOutcome],
}

#[derive(Serialize)]
struct Audit<'a> {
    schema_version: u32,
    counts: BTreeMap<String, usize>,
    subjects: Vec<AuditEntry<'a>>,
}

pub fn label(cfg: &PipelineConfig, subjects: &Path) -> Result<PathBuf, CliError> {
    let records = read_subjects(subjects)?;
    let assignments = assign_all(&records)?;
    let mut counts = BTreeMap::new();
    for a in &assignments {
        *counts.entry(a.group.to_string()).or_insert(0) += 1;
    }
    let audit = Audit {
        schema_version: SCHEMA_VERSION,
        counts,
        subjects: assignments
            .iter()
            .map(|a| AuditEntry { subject_id: &a.subject_id, group: a.group.to_string(), rules: &a.fired_rules })
            .collect(),
    };
    let groups_path = cfg.out.join(GROUPS_CSV);
    write_groups(&groups_path, &assignments)?;
    write_json(&cfg.out.join(AUDIT_JSON), &audit)?;
    let groups: Vec<DiagnosticGroup> = assignments.iter().map(|a| a.group.clone()).collect();
    match baseline_recall(&records, &groups) {
        Ok(b) => write_json(&cfg.out.join(BASELINE_JSON), &b)?,
        Err(e) => log::warn!("baseline recall not written: {e}"),
    }
    log::info!("labelled {} subjects: {:?}", assignments.len(), audit.counts);
    Ok(groups_path)
}

/// Every MRI column present in the scheme, including the derived total.
fn mri_matrix(records: &[SubjectRecord], scheme: &FeatureNamingScheme) -> Result<FeatureMatrix, CliError> {
    let columns: Vec<String> = scheme.all_mri().cloned().collect();
    let mut values = Array2::from_elem((records.len(), columns.len()), f64::NAN);
    let mut missing = Array2::from_elem((records.len(), columns.len()), true);
    for (i, r) in records.iter().enumerate() {
        for (j, c) in columns.iter().enumerate() {
            let v = if c == TOTAL_HIPPOCAMPUS_VOLUME { r.total_hippocampus_volume() } else { r.mri.get(c).copied() };
            if let Some(v) = v {
                values[[i, j]] = v;
                missing[[i, j]] = false;
            }
        }
    }
    let ids = records.iter().map(|r| r.subject_id.clone()).collect();
    Ok(FeatureMatrix::new(columns, values, missing, ids)?)
}

#[derive(Serialize)]
struct GlmDocument {
    schema_version: u32,
    sign: ZSign,
    reference_group: String,
    n_reference: usize,
    models: Vec<GlmModel<f64>>,
}

pub fn normalize(cfg: &PipelineConfig, subjects: &Path, groups: &Path) -> Result<PathBuf, CliError> {
    let scheme = FeatureNamingScheme::default();
    let mut records = read_subjects(subjects)?;
    let groups = groups_for(&records, groups)?;
    let reference: Vec<bool> = groups.iter().map(|g| *g == DiagnosticGroup::Cn).collect();
    let covs: Vec<Covariates<f64>> = records.iter().map(Covariates::of_record).collect();
    let m = mri_matrix(&records, &scheme)?;
    let (z, models) = normalize_matrix(&m, &reference, &covs, &scheme, cfg.sign)?;
    for (i, r) in records.iter_mut().enumerate() {
        r.mri.clear();
        for (j, name) in z.column_names.iter().enumerate() {
            if !z.missing[[i, j]] {
                r.mri.insert(name.clone(), z.values[[i, j]]);
            }
        }
    }
    let mut buf = Vec::new();
    write_subject_table(&records, &scheme, &mut buf)?;
    let path = cfg.out.join(ZSCORES_CSV);
    atomic_write(&path, &buf)?;
    let doc = GlmDocument {
        schema_version: SCHEMA_VERSION,
        sign: cfg.sign,
        reference_group: DiagnosticGroup::Cn.to_string(),
        n_reference: reference.iter().filter(|&&r| r).count(),
        models,
    };
    write_json(&cfg.out.join(GLM_JSON), &doc)?;
    log::info!("z-scored {} MRI columns against {} CN subjects", doc.models.len(), doc.n_reference);
    Ok(path)
}

#[derive(Serialize)]
struct CvDocument<'a> {
    schema_version: u32,
    contrast: String,
    positive_class: String,
    feature_set: String,
    n_rows: usize,
    n_positive: usize,
    columns: &'a [String],
    report: &'a CvReport,
}

pub fn train_eval(cfg: &PipelineConfig, features: &Path, groups: &Path) -> Result<CvReport, CliError> {
    let scheme = FeatureNamingScheme::default();
    let records = read_subjects(features)?;
    let groups = groups_for(&records, groups)?;
    let (rows, y) = contrast_rows(records, &groups, &cfg.contrast)?;
    let m = assemble_matrix(&rows, cfg.feature_set, &scheme)?;
    let report = nested_cv(&m, &y, &cfg.hyper_grid(), cfg.seed)?;
    let doc = CvDocument {
        schema_version: SCHEMA_VERSION,
        contrast: cfg.contrast.to_string(),
        positive_class: cfg.contrast.first.to_string(),
        feature_set: cfg.feature_set.to_string(),
        n_rows: y.len(),
        n_positive: y.iter().sum(),
        columns: &m.column_names,
        report: &report,
    };
    write_json(&cfg.out.join(CV_JSON), &doc)?;
    for f in &report.folds {
        write_roc(&cfg.out.join(roc_file(f.fold)), &f.roc)?;
    }
    log::info!(
        "{} {}: pooled F1 {:?}, AUC {:?}",
        cfg.contrast,
        cfg.feature_set,
        report.pooled.f1,
        report.pooled.auc
    );
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct FindingsDocument {
    pub schema_version: u32,
    pub contrast: String,
    pub alpha: f64,
    pub sign: ZSign,
    pub group_sizes: BTreeMap<String, usize>,
    pub iterations_run: usize,
    pub findings: Vec<RegionFinding>,
}

fn write_trace(path: &Path, result: &BorutaResult) -> Result<(), CliError> {
    let mut header = vec!["iteration".to_string(), "shadow_threshold".to_string()];
    header.extend(result.feature_names.iter().cloned());
    let rows = result.importance_history.iter().zip(&result.shadow_threshold).enumerate().map(|(i, (row, t))| {
        let mut out = vec![(i + 1).to_string(), t.to_string()];
        out.extend(row.iter().map(|v| v.map(|v| v.to_string()).unwrap_or_default()));
        out
    });
    atomic_write(path, &csv_bytes(&header, rows)?)
}

fn write_decisions(path: &Path, result: &BorutaResult) -> Result<(), CliError> {
    let header = ["feature", "decision", "hits"].map(String::from);
    let rows = (0..result.feature_names.len())
        .map(|j| vec![result.feature_names[j].clone(), result.decisions[j].to_string(), result.hits[j].to_string()]);
    atomic_write(path, &csv_bytes(&header, rows)?)
}

pub fn boruta(cfg: &PipelineConfig, zscores: &Path, groups: &Path) -> Result<FindingsDocument, CliError> {
    let scheme = FeatureNamingScheme::default();
    let records = read_subjects(zscores)?;
    let groups = groups_for(&records, groups)?;
    let (rows, y) = contrast_rows(records, &groups, &cfg.contrast)?;
    let m = assemble_matrix(&rows, cfg.boruta_columns, &scheme)?;
    let bc = cfg.boruta_config();
    let result = boruta_run(&m, &y, &bc)?;
    let (first, second) = (cfg.contrast.first.to_string(), cfg.contrast.second.to_string());
    let mut findings = significant_regions(&result, &m, &y, (&first, &second))?;
    if cfg.sign == ZSign::Conventional {
        // directions are defined on atrophy-positive scores
        for f in &mut findings {
            f.direction = direction_from_means(-f.mean_z[&first], -f.mean_z[&second]);
        }
    }
    let n_first = y.iter().sum();
    let doc = FindingsDocument {
        schema_version: SCHEMA_VERSION,
        contrast: cfg.contrast.to_string(),
        alpha: bc.alpha,
        sign: cfg.sign,
        group_sizes: BTreeMap::from([(first, n_first), (second, y.len() - n_first)]),
        iterations_run: result.iterations_run,
        findings,
    };
    write_json(&cfg.out.join(FINDINGS_JSON), &doc)?;
    write_trace(&cfg.out.join(TRACE_CSV), &result)?;
    write_decisions(&cfg.out.join(DECISIONS_CSV), &result)?;
    log::info!("{}: {} confirmed regions after {} iterations", cfg.contrast, doc.findings.len(), doc.iterations_run);
    Ok(doc)
}

/// label → normalize → train-eval → boruta, synthesizing the input cohort
/// first when no subject file is configured.
pub fn run(cfg: &PipelineConfig) -> Result<(), CliError> {
    let subjects = match &cfg.inputs.subjects {
        Some(p) => p.clone(),
        None => synth(cfg, false)?.0,
    };
    let groups = label(cfg, &subjects)?;
    let zscores = normalize(cfg, &subjects, &groups)?;
    train_eval(cfg, &zscores, &groups)?;
    boruta(cfg, &zscores, &groups)?;
    Ok(())
}
