//! Subject records, the CSV table schema, feature matrices and
//! training-fold imputation.

mod matrix;
mod naming;
mod record;
mod table;

use thiserror::Error;

pub use matrix::{apply_imputer, assemble_matrix, clinical_columns, fit_imputer, median, FeatureMatrix, FeatureSet, ImputerState};
pub use naming::{
    FeatureNamingScheme, Hemisphere, Measure, RegionFeature, UnknownFeature, DK_REGIONS, HIPPOCAMPUS,
    LH_HIPPOCAMPUS_VOLUME, RH_HIPPOCAMPUS_VOLUME, TOTAL_HIPPOCAMPUS_VOLUME,
};
pub use record::{ClinicianDx, CognitiveBattery, Presentation, Sex, SubjectRecord, MOCA_SUBSCORES};
pub use table::{
    parse_subject_table, read_subject_table, subject_columns, write_subject_table, BATTERY_COLUMNS, BIOMARKER_COLUMNS,
    IDENTITY_COLUMNS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("duplicate column `{0}`")]
    DuplicateColumn(String),
    #[error("required column `{0}` is absent")]
    MissingColumn(String),
    #[error("row {row}: value `{value}` out of range for column `{column}`")]
    OutOfRange { column: String, value: String, row: usize },
    #[error("duplicate subject_id `{0}`")]
    DuplicateSubject(String),
    #[error("no records")]
    EmptyRecords,
    #[error("column `{0}` has no observed training values")]
    UnimputableColumn(String),
    #[error("column `{0}` has missing cells")]
    MissingCells(String),
    #[error("non-finite observed value in column `{0}`")]
    NonFinite(String),
    #[error("matrix dimensions are inconsistent")]
    ShapeMismatch,
    #[error("unknown feature set `{name}`; valid names: {valid}")]
    UnknownFeatureSet { name: String, valid: String },
}
