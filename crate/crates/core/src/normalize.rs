//! Covariate-adjusted z-scores for MRI features.
//!
//! For every MRI feature a linear model `feature ~ 1 + age + sex + tiv` is
//! fitted by least squares on the cognitively normal reference subjects.
//! Each subject's feature is then expressed as
//!
//! ```text
//! z = (predicted - observed) / sd(reference residuals)
//! ```
//!
//! so atrophy (observed below expectation) gives a positive score. The
//! conventional orientation (`observed - predicted`) is available through
//! [`ZSign::Conventional`].

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureMatrix, FeatureNamingScheme, SubjectRecord};
use crate::linalg::{lstsq, LinalgError};
use crate::scalar::Scalar;

pub const MIN_REFERENCE_ROWS: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NormalizeError {
    #[error("{feature}: {n} reference rows, need at least {MIN_REFERENCE_ROWS}")]
    InsufficientReference { feature: String, n: usize },
    #[error("{feature}: singular design ({source})")]
    SingularDesign { feature: String, source: LinalgError },
    #[error("{feature}: reference residual SD is degenerate ({sd})")]
    DegenerateResidual { feature: String, sd: f64 },
    #[error("{0} covariate rows do not match {1} matrix rows")]
    CovariateMismatch(usize, usize),
    #[error("invalid covariates: {0}")]
    InvalidCovariates(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Covariates<T> {
    pub age: T,
    /// 0 = M, 1 = F.
    pub sex_code: T,
    /// Total intracranial volume, mm³.
    pub tiv: T,
}

impl<T: Scalar> Covariates<T> {
    pub fn new(age: T, sex_code: T, tiv: T) -> Self {
        Self { age, sex_code, tiv }
    }

    pub fn of_record(r: &SubjectRecord) -> Self {
        Self::new(T::of(r.age), T::of(r.sex.code()), T::of(r.etiv))
    }

    fn validate(&self) -> Result<(), NormalizeError> {
        let ok = self.age.is_finite()
            && (self.sex_code == T::zero() || self.sex_code == T::one())
            && self.tiv.is_finite()
            && self.tiv > T::zero();
        if ok {
            Ok(())
        } else {
            Err(NormalizeError::InvalidCovariates(format!("{self:?}")))
        }
    }
}

/// Orientation of the z-score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZSign {
    /// `(predicted - observed) / sd`: atrophy positive.
    #[default]
    Atrophy,
    /// `(observed - predicted) / sd`.
    Conventional,
}

/// Least-squares coefficients, before any residual-SD validation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlmCoefficients<T> {
    pub alpha: T,
    pub beta_age: T,
    pub beta_sex: T,
    pub beta_tiv: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmModel<T> {
    pub feature_name: String,
    pub alpha: T,
    pub beta_age: T,
    pub beta_sex: T,
    pub beta_tiv: T,
    /// Sample SD (n - 1) of the reference residuals.
    pub resid_sd: T,
    pub n_cn: usize,
}

fn design<T: Scalar>(covs: &[Covariates<T>]) -> Array2<T> {
    Array2::from_shape_fn((covs.len(), 4), |(i, j)| match j {
        0 => T::one(),
        1 => covs[i].age,
        2 => covs[i].sex_code,
        _ => covs[i].tiv,
    })
}

/// Least-squares fit of the covariate model, returning coefficients and residuals.
pub fn fit_coefficients<T: Scalar>(
    feature_name: &str,
    values: &[T],
    covs: &[Covariates<T>],
) -> Result<(GlmCoefficients<T>, Vec<T>), NormalizeError> {
    if values.len() != covs.len() {
        return Err(NormalizeError::CovariateMismatch(covs.len(), values.len()));
    }
    if values.len() < MIN_REFERENCE_ROWS {
        return Err(NormalizeError::InsufficientReference { feature: feature_name.to_string(), n: values.len() });
    }
    for c in covs {
        c.validate()?;
    }
    let x = design(covs);
    let fit = lstsq(x.view(), values)
        .map_err(|source| NormalizeError::SingularDesign { feature: feature_name.to_string(), source })?;
    let b = &fit.coefficients;
    Ok((GlmCoefficients { alpha: b[0], beta_age: b[1], beta_sex: b[2], beta_tiv: b[3] }, fit.residuals))
}

pub fn fit_glm<T: Scalar>(feature_name: &str, values: &[T], covs: &[Covariates<T>]) -> Result<GlmModel<T>, NormalizeError> {
    let (c, residuals) = fit_coefficients(feature_name, values, covs)?;
    let n = residuals.len();
    let mean = residuals.iter().copied().sum::<T>() / T::of_usize(n);
    let var = residuals.iter().map(|&r| (r - mean) * (r - mean)).sum::<T>() / T::of_usize(n - 1);
    let resid_sd = var.sqrt();
    let scale = values.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if !(resid_sd > T::epsilon() * T::of(1e4) * scale) || !resid_sd.is_finite() {
        return Err(NormalizeError::DegenerateResidual { feature: feature_name.to_string(), sd: resid_sd.as_f64() });
    }
    Ok(GlmModel {
        feature_name: feature_name.to_string(),
        alpha: c.alpha,
        beta_age: c.beta_age,
        beta_sex: c.beta_sex,
        beta_tiv: c.beta_tiv,
        resid_sd,
        n_cn: n,
    })
}

impl<T: Scalar> GlmModel<T> {
    pub fn predict(&self, c: &Covariates<T>) -> T {
        self.alpha + c.age * self.beta_age + c.sex_code * self.beta_sex + c.tiv * self.beta_tiv
    }

    /// Atrophy-positive z-score.
    pub fn zscore(&self, observed: T, c: &Covariates<T>) -> T {
        (self.predict(c) - observed) / self.resid_sd
    }

    pub fn zscore_signed(&self, observed: T, c: &Covariates<T>, sign: ZSign) -> T {
        match sign {
            ZSign::Atrophy => self.zscore(observed, c),
            ZSign::Conventional => -self.zscore(observed, c),
        }
    }
}

/// Replace every MRI column of `m` by its z-score column.
///
/// Models are fitted per column on the rows selected by `reference_rows`
/// (observed cells only). Non-MRI columns are copied unchanged; missing
/// cells stay missing.
pub fn normalize_matrix(
    m: &FeatureMatrix,
    reference_rows: &[bool],
    covs: &[Covariates<f64>],
    scheme: &FeatureNamingScheme,
    sign: ZSign,
) -> Result<(FeatureMatrix, Vec<GlmModel<f64>>), NormalizeError> {
    if covs.len() != m.n_rows() || reference_rows.len() != m.n_rows() {
        return Err(NormalizeError::CovariateMismatch(covs.len(), m.n_rows()));
    }
    let mri_cols: Vec<usize> = (0..m.n_cols()).filter(|&j| scheme.is_mri(&m.column_names[j])).collect();
    let fitted: Vec<(usize, GlmModel<f64>, Vec<f64>)> = mri_cols
        .par_iter()
        .map(|&j| {
            let name = &m.column_names[j];
            let (vals, cv): (Vec<f64>, Vec<Covariates<f64>>) = (0..m.n_rows())
                .filter(|&i| reference_rows[i] && !m.missing[[i, j]])
                .map(|i| (m.values[[i, j]], covs[i]))
                .unzip();
            let model = fit_glm(name, &vals, &cv)?;
            let z = (0..m.n_rows())
                .map(|i| {
                    if m.missing[[i, j]] {
                        f64::NAN
                    } else {
                        model.zscore_signed(m.values[[i, j]], &covs[i], sign)
                    }
                })
                .collect();
            Ok((j, model, z))
        })
        .collect::<Result<_, NormalizeError>>()?;

    let mut out = m.clone();
    let mut models = Vec::with_capacity(fitted.len());
    for (j, model, z) in fitted {
        for (i, v) in z.into_iter().enumerate() {
            out.values[[i, j]] = v;
        }
        models.push(model);
    }
    Ok((out, models))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn covs(n: usize) -> Vec<Covariates<f64>> {
        (0..n)
            .map(|i| Covariates::new(60.0 + (i * 7 % 23) as f64, (i % 2) as f64, 1.3e6 + (i * 37 % 41) as f64 * 1e4))
            .collect()
    }

    fn model() -> GlmModel<f64> {
        GlmModel { feature_name: "f".into(), alpha: 10.0, beta_age: 0.5, beta_sex: -2.0, beta_tiv: 0.001, resid_sd: 4.0, n_cn: 10 }
    }

    #[test]
    fn prediction_by_hand() {
        // 10 + 70*0.5 + 1*(-2) + 1.5e6*0.001 = 1543
        let c = Covariates::new(70.0, 1.0, 1_500_000.0);
        assert!((model().predict(&c) - 1543.0).abs() < 1e-9);
        let flat = GlmModel { beta_age: 0.0, beta_sex: 0.0, beta_tiv: 0.0, ..model() };
        assert_eq!(flat.predict(&c), 10.0);
    }

    #[test]
    fn prediction_is_linear_without_intercept() {
        let m = GlmModel { alpha: 0.0, ..model() };
        let a = Covariates::new(70.0, 1.0, 1.5e6);
        let b = Covariates::new(10.0, 0.0, 2.0e5);
        let zero = Covariates::new(0.0, 0.0, 0.0);
        let sum = Covariates::new(80.0, 1.0, 1.7e6);
        assert!((m.predict(&a) + m.predict(&b) - m.predict(&zero) - m.predict(&sum)).abs() < 1e-9);
    }

    #[test]
    fn zscore_sign_convention() {
        let m = model();
        let c = Covariates::new(70.0, 1.0, 1.5e6);
        let p = m.predict(&c);
        assert_eq!(m.zscore(p, &c), 0.0);
        assert!((m.zscore(p - m.resid_sd, &c) - 1.0).abs() < 1e-12);
        assert!((m.zscore(p + 2.0 * m.resid_sd, &c) + 2.0).abs() < 1e-12);
        assert!((m.zscore_signed(p - m.resid_sd, &c, ZSign::Conventional) + 1.0).abs() < 1e-12);
        assert!(m.zscore(p - 1.0, &c) > m.zscore(p, &c));
    }

    #[test]
    fn constant_feature_is_degenerate() {
        let c = covs(20);
        let y = vec![42.0; 20];
        let (coef, _) = fit_coefficients("f", &y, &c).unwrap();
        assert!((coef.alpha - 42.0).abs() < 1e-8);
        assert!(coef.beta_age.abs() < 1e-10 && coef.beta_sex.abs() < 1e-10 && coef.beta_tiv.abs() < 1e-12);
        assert!(matches!(fit_glm("f", &y, &c), Err(NormalizeError::DegenerateResidual { .. })));
    }

    #[test]
    fn too_few_reference_rows() {
        let c = covs(4);
        assert!(matches!(fit_glm("f", &[1.0, 2.0, 3.0, 4.0], &c), Err(NormalizeError::InsufficientReference { n: 4, .. })));
    }

    #[test]
    fn single_sex_reference_is_singular() {
        let c: Vec<_> = covs(10).into_iter().map(|c| Covariates { sex_code: 1.0, ..c }).collect();
        let y: Vec<f64> = (0..10).map(|i| i as f64 * 1.3 + (i % 3) as f64).collect();
        assert!(matches!(fit_glm("f", &y, &c), Err(NormalizeError::SingularDesign { .. })));
    }
}
