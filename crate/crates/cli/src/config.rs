//! Pipeline configuration: TOML file, overridden by command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use atlasforest::boruta::BorutaConfig;
use atlasforest::cohort::DiagnosticGroup;
use atlasforest::features::FeatureSet;
use atlasforest::forest::{default_grid, HyperParams};
use atlasforest::normalize::ZSign;
use atlasforest::synth::SynthConfig;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::CliError;

/// Ordered pair of analysis groups; the first is the positive class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contrast {
    pub first: DiagnosticGroup,
    pub second: DiagnosticGroup,
}

impl Contrast {
    pub fn label(&self, g: &DiagnosticGroup) -> Option<usize> {
        if *g == self.first {
            Some(1)
        } else if *g == self.second {
            Some(0)
        } else {
            None
        }
    }
}

impl Default for Contrast {
    fn default() -> Self {
        Self { first: DiagnosticGroup::Atad, second: DiagnosticGroup::NonAd }
    }
}

impl fmt::Display for Contrast {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.first, self.second)
    }
}

impl FromStr for Contrast {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let valid = "expected A:B with A, B distinct among tAD, atAD, nonAD, CN";
        let (a, b) = s.split_once(':').ok_or_else(|| format!("bad contrast `{s}`: {valid}"))?;
        let group = |t: &str| match t.parse::<DiagnosticGroup>() {
            Ok(g) if !g.is_excluded() => Ok(g),
            _ => Err(format!("bad contrast `{s}`: {valid}")),
        };
        let (first, second) = (group(a)?, group(b)?);
        if first == second {
            return Err(format!("bad contrast `{s}`: {valid}"));
        }
        Ok(Self { first, second })
    }
}

impl Serialize for Contrast {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Contrast {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPoint {
    pub max_depth: usize,
    pub n_trees: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    /// Subject CSV; `run` synthesizes a cohort when absent.
    pub subjects: Option<PathBuf>,
    pub groups: Option<PathBuf>,
    pub zscores: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub out: PathBuf,
    /// Worker threads; all cores when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub feature_set: FeatureSet,
    pub contrast: Contrast,
    pub sign: ZSign,
    /// Columns offered to Boruta; must be brain regions.
    pub boruta_columns: FeatureSet,
    pub grid: Vec<GridPoint>,
    pub inputs: Inputs,
    pub boruta: BorutaConfig,
    /// Generator settings for `synth` and input-less `run`; the built-in
    /// cohort when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthConfig>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            threads: None,
            feature_set: FeatureSet::MriPlusClinical,
            contrast: Contrast::default(),
            sign: ZSign::Atrophy,
            boruta_columns: FeatureSet::Regions,
            grid: default_grid().into_iter().map(|p| GridPoint { max_depth: p.max_depth, n_trees: p.n_trees }).collect(),
            inputs: Inputs::default(),
            boruta: BorutaConfig::default(),
            synth: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(format!("cannot serialize config: {e}")))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.grid.is_empty() {
            return Err(CliError::Config("grid must not be empty".into()));
        }
        if let Some(p) = self.grid.iter().find(|p| p.max_depth == 0 || p.n_trees == 0) {
            return Err(CliError::Config(format!("grid point {p:?} needs depth and tree count of at least 1")));
        }
        if self.threads == Some(0) {
            return Err(CliError::Config("threads must be at least 1".into()));
        }
        if !matches!(self.boruta_columns, FeatureSet::Regions | FeatureSet::MriOnly) {
            return Err(CliError::Config(format!(
                "boruta_columns must be `regions` or `mri`, got `{}`",
                self.boruta_columns
            )));
        }
        self.boruta.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(s) = &self.synth {
            s.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn hyper_grid(&self) -> Vec<HyperParams> {
        self.grid.iter().map(|p| HyperParams::new(p.max_depth, p.n_trees)).collect()
    }

    pub fn synth_config(&self) -> SynthConfig {
        let mut c = self.synth.clone().unwrap_or_else(|| atlasforest::synth::default_cohort_config(self.seed));
        c.seed = self.seed;
        c
    }

    pub fn boruta_config(&self) -> BorutaConfig {
        BorutaConfig { seed: self.seed, ..self.boruta }
    }
}

pub fn parse_feature_set(s: &str) -> Result<FeatureSet, CliError> {
    s.parse().map_err(|e: atlasforest::features::FeatureError| CliError::Config(e.to_string()))
}
