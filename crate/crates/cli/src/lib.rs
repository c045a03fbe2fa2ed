//! Command-line front end for the atlasforest pipeline: configuration,
//! stage orchestration and artifact files.

pub mod config;
pub mod error;
pub mod io;
pub mod stages;

pub use config::{Contrast, PipelineConfig};
pub use error::CliError;
