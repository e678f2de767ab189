//! Outcome regressions `μ(a, w)`, their propensity-reduced versions
//! `μ̄(a, p)` obtained by regressing fitted `μ` on the fitted propensity, and
//! the augmentation covariate `h` built from them.

mod regressor;

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

pub use regressor::{
    Features, KnnFit, LocalLinearFit, OracleFn, PolyFit, Regressor, RegressorKind, RegressorSpec, RowFn,
};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::logit::{clamp_score, expit, fit_mle, logit, DesignSpec, PropensityFit, CLAMP_HI, CLAMP_LO};

/// Regression of `μ(a, W)` on the propensity. Fitted regressors see
/// `logit(p)` as their single feature, which keeps linear-index designs
/// exactly representable by low-degree polynomials.
#[derive(Clone)]
pub enum ReducedRegression {
    Fitted(Regressor),
    Oracle(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for ReducedRegression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReducedRegression::Fitted(r) => f.debug_tuple("Fitted").field(r).finish(),
            ReducedRegression::Oracle(_) => f.write_str("Oracle"),
        }
    }
}

impl ReducedRegression {
    pub fn oracle(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ReducedRegression::Oracle(Arc::new(f))
    }

    pub fn predict(&self, p: f64) -> f64 {
        match self {
            ReducedRegression::Fitted(r) => r.predict(&[logit(clamp_score(p))]),
            ReducedRegression::Oracle(f) => f(p),
        }
    }
}

/// Regressor choices for the nuisance fits.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NuisanceSpec {
    pub mu: RegressorSpec,
    pub mu_bar: RegressorSpec,
}

impl Default for NuisanceSpec {
    fn default() -> Self {
        Self {
            mu: RegressorSpec::outcome_default(),
            mu_bar: RegressorSpec::reduced_default(),
        }
    }
}

/// Fitted `μ`, `μ̄` (indexed by arm) and the base propensity model.
#[derive(Debug, Clone)]
pub struct NuisanceFit {
    pub mu: [Regressor; 2],
    pub mu_bar: [ReducedRegression; 2],
    /// Unaugmented propensity model; evaluated on rows `w = (1, v)`.
    pub pi_fit: PropensityFit,
    pub clamp: (f64, f64),
}

impl NuisanceFit {
    pub fn new(mu: [Regressor; 2], mu_bar: [ReducedRegression; 2], pi_fit: PropensityFit) -> Self {
        Self {
            mu,
            mu_bar,
            pi_fit,
            clamp: (CLAMP_LO, CLAMP_HI),
        }
    }

    /// Clamped propensity at a base row `w = (1, v)`.
    pub fn pi(&self, w: &[f64]) -> f64 {
        expit(self.pi_fit.index(w)).clamp(self.clamp.0, self.clamp.1)
    }

    /// `μ(arm, v)` at covariates `v` (no intercept).
    pub fn mu(&self, arm: u8, v: &[f64]) -> f64 {
        self.mu[usize::from(arm)].predict(v)
    }

    pub fn mu_bar(&self, arm: u8, p: f64) -> f64 {
        self.mu_bar[usize::from(arm)].predict(p)
    }

    /// `h(w) = [μ(1,w) − μ̄(1,π)]/π + [μ(0,w) − μ̄(0,π)]/(1 − π)`.
    pub fn h(&self, w: &[f64]) -> f64 {
        let v = &w[1..];
        let p = self.pi(w);
        (self.mu(1, v) - self.mu_bar(1, p)) / p + (self.mu(0, v) - self.mu_bar(0, p)) / (1.0 - p)
    }
}

fn arm_features(d: &Dataset, idx: &[usize]) -> Result<Features> {
    let data = idx.iter().flat_map(|&i| d.v_row(i).to_vec()).collect();
    Features::new(data, d.p())
}

fn nonempty_arm(d: &Dataset, arm: u8) -> Result<Vec<usize>> {
    let idx = d.arm_indices(arm);
    if idx.is_empty() {
        return Err(Error::ArmTooSmall { arm, have: 0, need: 1 });
    }
    Ok(idx)
}

/// Regresses `Y` on `V` within arm `arm`.
pub fn fit_outcome_regression(d: &Dataset, arm: u8, spec: &RegressorSpec) -> Result<Regressor> {
    let idx = nonempty_arm(d, arm)?;
    let y: Vec<f64> = idx.iter().map(|&i| d.y()[i]).collect();
    Regressor::fit_spec(spec, &arm_features(d, &idx)?, &y)
}

/// Regresses the fitted `μ(arm, Wᵢ)` on `π(Wᵢ)` within arm `arm`.
pub fn fit_reduced_regression(
    d: &Dataset,
    arm: u8,
    mu: &Regressor,
    pi_fit: &PropensityFit,
    spec: &RegressorSpec,
) -> Result<ReducedRegression> {
    let idx = nonempty_arm(d, arm)?;
    let x: Vec<f64> = idx.iter().map(|&i| logit(pi_fit.predict(d.w_row(i)))).collect();
    let resp: Vec<f64> = idx.iter().map(|&i| mu.predict(d.v_row(i))).collect();
    let flat = |v: &[f64]| v.iter().all(|&t| t == v[0]);
    if flat(&x) && !flat(&resp) {
        return Err(Error::Degenerate(format!(
            "propensity is constant in arm {arm} but the outcome regression is not"
        )));
    }
    Regressor::fit_spec(spec, &Features::scalar(x)?, &resp).map(ReducedRegression::Fitted)
}

/// Fits the base propensity model, both outcome regressions and both
/// reduced regressions on `d`.
pub fn fit_nuisance(d: &Dataset, spec: &NuisanceSpec) -> Result<NuisanceFit> {
    let pi_fit = fit_mle(&DesignSpec::base(d), d.a())?;
    fit_nuisance_given_pi(d, spec, pi_fit)
}

/// As [`fit_nuisance`], with an already fitted base propensity model.
pub fn fit_nuisance_given_pi(d: &Dataset, spec: &NuisanceSpec, pi_fit: PropensityFit) -> Result<NuisanceFit> {
    let mu = [
        fit_outcome_regression(d, 0, &spec.mu)?,
        fit_outcome_regression(d, 1, &spec.mu)?,
    ];
    let mu_bar = [
        fit_reduced_regression(d, 0, &mu[0], &pi_fit, &spec.mu_bar)?,
        fit_reduced_regression(d, 1, &mu[1], &pi_fit, &spec.mu_bar)?,
    ];
    Ok(NuisanceFit::new(mu, mu_bar, pi_fit))
}

/// Regresses squared residuals `(Y − μ(arm, V))²` on `V` within the arm.
/// Predictions should be floored at zero by the caller.
pub fn fit_outcome_variance(d: &Dataset, arm: u8, mu: &Regressor, spec: &RegressorSpec) -> Result<Regressor> {
    let idx = nonempty_arm(d, arm)?;
    let r2: Vec<f64> = idx
        .iter()
        .map(|&i| (d.y()[i] - mu.predict(d.v_row(i))).powi(2))
        .collect();
    Regressor::fit_spec(spec, &arm_features(d, &idx)?, &r2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HDiagnostics {
    pub mean: f64,
    pub variance: f64,
    pub n: usize,
}

/// The augmentation covariate `h`, evaluated on base rows `w = (1, v)`.
#[derive(Debug, Clone)]
pub struct AugmentationFn {
    nf: Arc<NuisanceFit>,
    pub diag: HDiagnostics,
}

impl AugmentationFn {
    pub fn eval(&self, w: &[f64]) -> f64 {
        self.nf.h(w)
    }

    pub fn eval_all(&self, d: &Dataset) -> Vec<f64> {
        (0..d.n()).map(|i| self.eval(d.w_row(i))).collect()
    }

    pub fn nuisance(&self) -> &NuisanceFit {
        &self.nf
    }
}

/// Wraps `nf` as the augmentation function, recording the mean and
/// variance of `h` over `d` (the sample the nuisances were fitted on).
pub fn build_h(nf: Arc<NuisanceFit>, d: &Dataset) -> AugmentationFn {
    let vals: Vec<f64> = (0..d.n()).map(|i| nf.h(d.w_row(i))).collect();
    let n = vals.len();
    let mean = vals.iter().sum::<f64>() / n as f64;
    let variance = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    AugmentationFn {
        nf,
        diag: HDiagnostics { mean, variance, n },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_covariate(n: usize) -> Dataset {
        // deterministic, both arms spread over the covariate range
        let v: Vec<f64> = (0..n).map(|i| -2.0 + 4.0 * i as f64 / (n - 1) as f64).collect();
        let a: Vec<u8> = (0..n).map(|i| u8::from((i * 7) % 5 < 2 + (i * 3 / n))).collect();
        let y: Vec<f64> = v
            .iter()
            .zip(&a)
            .map(|(x, &t)| if t == 1 { 1.0 + 2.0 * x } else { -0.5 * x })
            .collect();
        Dataset::new(vec!["w1".into()], v, a, y).unwrap()
    }

    #[test]
    fn outcome_regression_linear_exact() {
        let d = one_covariate(60);
        let r = fit_outcome_regression(&d, 1, &RegressorSpec::single(RegressorKind::Linear)).unwrap();
        let c = r.coefficients().unwrap();
        assert!((c[0] - 1.0).abs() < 1e-10 && (c[1] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn reduction_exact_in_one_dimension() {
        let d = one_covariate(80);
        let nf = fit_nuisance(&d, &NuisanceSpec::default()).unwrap();
        // exact on the support of each arm; outside it predictions are clamped
        for i in 0..d.n() {
            let arm = d.a()[i];
            let p = nf.pi(d.w_row(i));
            let gap = nf.mu(arm, d.v_row(i)) - nf.mu_bar(arm, p);
            assert!(gap.abs() < 1e-6, "arm {arm}, unit {i}: {gap}");
        }
    }

    #[test]
    fn constant_outcome_gives_constant_reduction_and_zero_h() {
        let d = one_covariate(40);
        let d = d.with_outcome(vec![5.0; 40]).unwrap();
        let nf = fit_nuisance(&d, &NuisanceSpec::default()).unwrap();
        for p in [0.1, 0.5, 0.9] {
            assert!((nf.mu_bar(0, p) - 5.0).abs() < 1e-9);
        }
        assert!(nf.h(&[1.0, 0.3]).abs() < 1e-6);
    }

    #[test]
    fn h_vanishes_when_outcomes_depend_on_propensity_only() {
        let design = DesignSpec::from_rows(vec![1.0, 0.0], 2).unwrap();
        let pi_fit = PropensityFit::from_coefficients(&design, vec![0.3, 1.2]).unwrap();
        let index = |v: &[f64]| 0.3 + 1.2 * v[0];
        let nf = NuisanceFit::new(
            [
                Regressor::oracle(move |v| 2.0 * index(v)),
                Regressor::oracle(move |v| index(v).powi(2)),
            ],
            [
                ReducedRegression::oracle(|p| 2.0 * logit(p)),
                ReducedRegression::oracle(|p| logit(p).powi(2)),
            ],
            pi_fit,
        );
        let d = one_covariate(50);
        let h = build_h(Arc::new(nf), &d);
        for i in 0..d.n() {
            assert!(h.eval(d.w_row(i)).abs() < 1e-10);
        }
        assert!(h.diag.variance < 1e-20);
    }

    #[test]
    fn h_finite_at_clamped_propensity() {
        let pi_fit =
            PropensityFit::from_coefficients(&DesignSpec::from_rows(vec![1.0, 0.0], 2).unwrap(), vec![0.0, 100.0])
                .unwrap();
        let nf = NuisanceFit::new(
            [Regressor::oracle(|v| v[0]), Regressor::oracle(|v| 2.0 * v[0])],
            [ReducedRegression::oracle(|_| 0.0), ReducedRegression::oracle(|_| 1.0)],
            pi_fit,
        );
        for x in [-50.0, 50.0] {
            assert!(nf.h(&[1.0, x]).is_finite());
        }
    }

    #[test]
    fn degenerate_propensity_rejected() {
        let d = one_covariate(30);
        let flat = PropensityFit::from_coefficients(&DesignSpec::base(&d), vec![0.0, 0.0]).unwrap();
        let mu = Regressor::oracle(|v| v[0]);
        let err = fit_reduced_regression(&d, 1, &mu, &flat, &RegressorSpec::reduced_default());
        assert!(matches!(err, Err(Error::Degenerate(_))));
        let c = Regressor::oracle(|_| 3.0);
        let r = fit_reduced_regression(&d, 1, &c, &flat, &RegressorSpec::reduced_default()).unwrap();
        assert!((r.predict(0.5) - 3.0).abs() < 1e-12);
    }
}
