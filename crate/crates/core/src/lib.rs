//! Diagnostic pipeline for atypical Alzheimer's disease from clinical and
//! regional MRI features.
//!
//! * [`cohort`] assigns diagnostic groups from biomarker and memory criteria.
//! * [`features`] holds the subject data model, CSV schema and imputation.
//! * [`normalize`] turns MRI features into covariate-adjusted z-scores.
//! * [`forest`] is a from-scratch random forest classifier.
//! * [`boruta`] runs all-relevant feature selection with shadow features.
//! * [`eval`] provides metrics, ROC/AUC and 5×2 nested cross-validation.
//! * [`synth`] generates cohorts with planted ground truth.
//!
//! Numeric kernels are generic over [`Scalar`]; the aliases below fix them
//! to `f64`, which is what the pipeline uses.

pub mod boruta;
pub mod cohort;
pub mod eval;
pub mod features;
pub mod forest;
pub mod linalg;
pub mod normalize;
pub mod rng;
mod scalar;
pub mod synth;

pub use scalar::Scalar;

pub type ForestModel = forest::Forest<f64>;
pub type GlmModel = normalize::GlmModel<f64>;
pub type Covariates = normalize::Covariates<f64>;
pub type RocPoint = eval::RocPoint<f64>;

