use std::path::Path;

use atlasforest::boruta::BorutaError;
use atlasforest::cohort::CohortError;
use atlasforest::eval::EvalError;
use atlasforest::features::FeatureError;
use atlasforest::forest::ForestError;
use atlasforest::normalize::NormalizeError;
use atlasforest::synth::SynthError;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{message}")]
    Data { message: String, path: Option<String> },
    #[error("{0}")]
    Numeric(String),
}

#[derive(Debug, Serialize)]
pub struct ErrorReport<'a> {
    pub kind: &'a str,
    pub exit_code: i32,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<&'a str>,
}

impl CliError {
    pub fn data(message: impl Into<String>) -> Self {
        CliError::Data { message: message.into(), path: None }
    }

    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Data { message: format!("{}: {e}", path.display()), path: Some(path.display().to_string()) }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data { .. } => 3,
            CliError::Numeric(_) => 4,
        }
    }

    pub fn report(&self) -> ErrorReport<'_> {
        let (kind, path) = match self {
            CliError::Config(_) => ("config", None),
            CliError::Data { path, .. } => ("data", path.as_deref()),
            CliError::Numeric(_) => ("numeric", None),
        };
        ErrorReport { kind, exit_code: self.exit_code(), message: self.to_string(), path }
    }
}

impl From<FeatureError> for CliError {
    fn from(e: FeatureError) -> Self {
        match e {
            FeatureError::Io { ref path, .. } => CliError::Data { path: Some(path.clone()), message: e.to_string() },
            FeatureError::UnknownFeatureSet { .. } => CliError::Config(e.to_string()),
            _ => CliError::data(e.to_string()),
        }
    }
}

impl From<CohortError> for CliError {
    fn from(e: CohortError) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<NormalizeError> for CliError {
    fn from(e: NormalizeError) -> Self {
        match e {
            NormalizeError::InsufficientReference { .. } | NormalizeError::InvalidCovariates(..) => {
                CliError::data(e.to_string())
            }
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<ForestError> for CliError {
    fn from(e: ForestError) -> Self {
        match e {
            ForestError::SingleClass | ForestError::MissingCells => CliError::data(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Forest(f) => f.into(),
            EvalError::Feature(f) => f.into(),
            EvalError::TooSmall { .. } | EvalError::SingleClass | EvalError::NotBinary => CliError::data(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<BorutaError> for CliError {
    fn from(e: BorutaError) -> Self {
        match e {
            BorutaError::InvalidConfig(m) => CliError::Config(m),
            BorutaError::Forest(f) => f.into(),
            BorutaError::Feature(f) => f.into(),
            _ => CliError::data(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        CliError::Config(e.to_string())
    }
}
