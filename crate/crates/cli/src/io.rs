//! Artifact files. Every write goes to a temporary sibling first and is
//! renamed into place, so readers never see a partial file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use atlasforest::cohort::{DiagnosticGroup, GroupAssignment};
use atlasforest::eval::RocPoint;
use serde::Serialize;

use crate::error::CliError;

pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Numeric(e.to_string()))?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

pub fn csv_bytes(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::data(e.to_string());
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(&row).map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::data(e.to_string()))
}

pub fn write_groups(path: &Path, assignments: &[GroupAssignment]) -> Result<(), CliError> {
    let header = ["subject_id", "group", "fired_rules"].map(String::from);
    let rows = assignments.iter().map(|a| vec![a.subject_id.clone(), a.group.to_string(), a.rules_summary()]);
    atomic_write(path, &csv_bytes(&header, rows)?)
}

/// `subject_id → group` from a group CSV.
pub fn read_groups(path: &Path) -> Result<BTreeMap<String, DiagnosticGroup>, CliError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    let headers = rdr.headers().map_err(|e| CliError::io(path, e))?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| CliError::Data {
            message: format!("{}: missing column `{name}`", path.display()),
            path: Some(path.display().to_string()),
        })
    };
    let (id, group) = (col("subject_id")?, col("group")?);
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::io(path, e))?;
        let g: DiagnosticGroup = rec[group]
            .parse()
            .map_err(|_| CliError::data(format!("{}: unknown group `{}`", path.display(), &rec[group])))?;
        if out.insert(rec[id].to_string(), g).is_some() {
            return Err(CliError::data(format!("{}: duplicate subject `{}`", path.display(), &rec[id])));
        }
    }
    Ok(out)
}

pub fn write_roc(path: &Path, points: &[RocPoint<f64>]) -> Result<(), CliError> {
    let header = ["threshold", "fpr", "tpr"].map(String::from);
    let rows = points.iter().map(|p| {
        let t = p.threshold.map_or_else(|| "inf".to_string(), |t| t.to_string());
        vec![t, p.fpr.to_string(), p.tpr.to_string()]
    });
    atomic_write(path, &csv_bytes(&header, rows)?)
}

pub fn out_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use atlasforest::cohort::RuleOutcome;

    #[test]
    fn groups_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.csv");
        let a = vec![
            GroupAssignment {
                subject_id: "s1".into(),
                group: DiagnosticGroup::Atad,
                fired_rules: vec![RuleOutcome::new("no-tbi", true, "")],
            },
            GroupAssignment { subject_id: "s2".into(), group: DiagnosticGroup::Excluded("tbi".into()), fired_rules: vec![] },
        ];
        write_groups(&p, &a).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("subject_id,group,fired_rules\ns1,atAD,no-tbi=pass\n"), "{text}");
        let g = read_groups(&p).unwrap();
        assert_eq!(g["s2"], DiagnosticGroup::Excluded("tbi".into()));
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn missing_file_names_path() {
        let e = read_groups(Path::new("/nonexistent/groups.csv")).unwrap_err();
        assert_eq!(e.exit_code(), 3);
        assert_eq!(e.report().path, Some("/nonexistent/groups.csv"));
    }
}
