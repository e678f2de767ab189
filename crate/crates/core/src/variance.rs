//! Plug-in estimates of the asymptotic variance of the matching estimator,
//! the variance reduction from estimating an (augmented) propensity model,
//! the nonparametric efficiency bound and Wald intervals.
//!
//! Moments conditional on the propensity are estimated by splitting units
//! into equal-count strata of `logit π` and fitting a straight line in
//! `logit π` within each stratum; residual moments stand in for the
//! conditional ones.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::equilibrated_condition;
use crate::logit::logit;
use crate::nuisance::{fit_outcome_variance, AugmentationFn, NuisanceFit, Regressor, RegressorSpec};

/// Smallest stratum the binning aims for.
pub const MIN_STRATUM: usize = 5;
const MAX_INFO_CONDITION: f64 = 1e12;

/// Source of `σ̄²(a, p) = var(Y | A = a, π = p)`.
#[derive(Clone)]
pub enum CondVar {
    Stratified,
    Known(Arc<dyn Fn(u8, f64) -> f64 + Send + Sync>),
}

/// Known `σ²(a, v)`.
pub type OutcomeVarFn = Arc<dyn Fn(u8, &[f64]) -> f64 + Send + Sync>;

impl fmt::Debug for CondVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CondVar::Stratified => "Stratified",
            CondVar::Known(_) => "Known",
        })
    }
}

/// Source of `σ²(a, w) = var(Y | A = a, W = w)`, evaluated on covariates
/// `v` (no intercept). Fitted values are floored at zero.
#[derive(Clone)]
pub enum OutcomeVar {
    Fitted(Box<[Regressor; 2]>),
    Known(OutcomeVarFn),
}

impl fmt::Debug for OutcomeVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutcomeVar::Fitted(_) => "Fitted",
            OutcomeVar::Known(_) => "Known",
        })
    }
}

impl OutcomeVar {
    /// Smooths squared residuals of the outcome regressions on `V`.
    pub fn fit(d: &Dataset, nf: &NuisanceFit, spec: &RegressorSpec) -> Result<Self> {
        Ok(OutcomeVar::Fitted(Box::new([
            fit_outcome_variance(d, 0, &nf.mu[0], spec)?,
            fit_outcome_variance(d, 1, &nf.mu[1], spec)?,
        ])))
    }

    pub fn eval(&self, arm: u8, v: &[f64]) -> f64 {
        match self {
            OutcomeVar::Fitted(r) => r[usize::from(arm)].predict(v).max(0.0),
            OutcomeVar::Known(f) => f(arm, v),
        }
    }
}

/// Equal-count strata over a set of units keyed by `logit π`.
#[derive(Debug, Clone)]
struct Strata {
    /// Largest key in each stratum, ascending.
    upper: Vec<f64>,
    members: Vec<Vec<usize>>,
}

impl Strata {
    fn new(keys: &[f64], units: &[usize]) -> Self {
        let mut order: Vec<usize> = units.to_vec();
        order.sort_by(|&i, &j| keys[i].total_cmp(&keys[j]).then(i.cmp(&j)));
        let n = order.len();
        let nb = ((n as f64).cbrt().ceil() as usize).min(n / MIN_STRATUM).max(1);
        let mut upper = Vec::with_capacity(nb);
        let mut members = Vec::with_capacity(nb);
        for b in 0..nb {
            let chunk = order[b * n / nb..(b + 1) * n / nb].to_vec();
            upper.push(chunk.last().map_or(f64::NEG_INFINITY, |&i| keys[i]));
            members.push(chunk);
        }
        Self { upper, members }
    }

    fn locate(&self, key: f64) -> usize {
        self.upper.partition_point(|&u| u < key).min(self.upper.len() - 1)
    }
}

/// Residuals of `z` after a least-squares line in `x` (or centring, when
/// the stratum is too small or `x` is flat), and the degrees of freedom
/// used.
fn detrend(x: &[f64], z: &[f64]) -> (Vec<f64>, usize) {
    let n = x.len();
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let mz = z.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if n >= 3 && sxx > 1e-12 * nf * (1.0 + mx * mx) {
        let sxz: f64 = x.iter().zip(z).map(|(a, b)| (a - mx) * (b - mz)).sum();
        let slope = sxz / sxx;
        let res = x.iter().zip(z).map(|(a, b)| b - mz - slope * (a - mx)).collect();
        (res, 2)
    } else {
        (z.iter().map(|b| b - mz).collect(), 1)
    }
}

/// Per-unit propensities and their logits on `d`.
fn propensities(d: &Dataset, nf: &NuisanceFit) -> (Vec<f64>, Vec<f64>) {
    let p: Vec<f64> = (0..d.n()).map(|i| nf.pi(d.w_row(i))).collect();
    let key = p.iter().map(|&x| logit(x)).collect();
    (p, key)
}

/// Within-stratum residual variance of `z` over `units`, per stratum.
/// Strata with fewer than two units get `None`.
fn stratum_variances(strata: &Strata, key: &[f64], z: &[f64]) -> Vec<Option<f64>> {
    strata
        .members
        .iter()
        .map(|m| {
            if m.len() < 2 {
                return None;
            }
            let x: Vec<f64> = m.iter().map(|&i| key[i]).collect();
            let zz: Vec<f64> = m.iter().map(|&i| z[i]).collect();
            let (res, k) = detrend(&x, &zz);
            let dof = m.len().saturating_sub(k).max(1);
            Some(res.iter().map(|r| r * r).sum::<f64>() / dof as f64)
        })
        .collect()
}

/// Fills skipped strata from the nearest non-empty neighbour.
fn fill_gaps(v: Vec<Option<f64>>) -> Vec<f64> {
    let known: Vec<(usize, f64)> = v.iter().enumerate().filter_map(|(b, x)| x.map(|x| (b, x))).collect();
    (0..v.len())
        .map(|b| known.iter().min_by_key(|(k, _)| k.abs_diff(b)).map_or(0.0, |&(_, x)| x))
        .collect()
}

/// Stratified `σ̄²(a, ·)` for both arms, as a lookup on `logit p`.
struct StratifiedSbar {
    strata: [Strata; 2],
    values: [Vec<f64>; 2],
    skipped: usize,
}

impl StratifiedSbar {
    fn new(d: &Dataset, key: &[f64]) -> Self {
        let mut skipped = 0;
        let mut build = |arm: u8| {
            let s = Strata::new(key, &d.arm_indices(arm));
            let raw = stratum_variances(&s, key, d.y());
            skipped += raw.iter().filter(|x| x.is_none()).count();
            (s, fill_gaps(raw))
        };
        let (s0, v0) = build(0);
        let (s1, v1) = build(1);
        Self {
            strata: [s0, s1],
            values: [v0, v1],
            skipped,
        }
    }

    fn eval(&self, arm: u8, key: f64) -> f64 {
        let a = usize::from(arm);
        self.values[a][self.strata[a].locate(key)]
    }
}

/// `σ̄²(a, πᵢ)` at every unit of `d`, plus the number of skipped strata.
fn sbar_at_units(d: &Dataset, p: &[f64], key: &[f64], sbar: &CondVar) -> ([Vec<f64>; 2], usize) {
    match sbar {
        CondVar::Known(f) => ([0, 1].map(|arm| p.iter().map(|&pi| f(arm, pi)).collect()), 0),
        CondVar::Stratified => {
            let s = StratifiedSbar::new(d, key);
            (
                [0, 1].map(|arm| key.iter().map(|&k| s.eval(arm, k)).collect()),
                s.skipped,
            )
        }
    }
}

/// Plug-ins of `σ²₁` and `σ²₂,M`, averaged over the units of `d`, with `psi`
/// the matching estimate.
pub fn estimate_sigma2_m(d: &Dataset, nf: &NuisanceFit, m: usize, sbar: &CondVar, psi: f64) -> Result<(f64, f64)> {
    let (s1, s2, _) = sigma2_components(d, nf, m, sbar, psi)?;
    Ok((s1, s2))
}

fn sigma2_components(d: &Dataset, nf: &NuisanceFit, m: usize, sbar: &CondVar, psi: f64) -> Result<(f64, f64, usize)> {
    if m == 0 {
        return Err(Error::InvalidArgument("number of matches must be >= 1".into()));
    }
    let (p, key) = propensities(d, nf);
    let ([sb0, sb1], skipped) = sbar_at_units(d, &p, &key, sbar);
    let n = d.n() as f64;
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    for i in 0..d.n() {
        let pi = p[i];
        let gap = nf.mu_bar(1, pi) - nf.mu_bar(0, pi) - psi;
        s1 += sb1[i] / pi + sb0[i] / (1.0 - pi) + gap * gap;
        s2 += sb1[i] * (1.0 / pi - pi) + sb0[i] * (1.0 / (1.0 - pi) - 1.0 + pi);
    }
    let s1 = s1 / n;
    let s2 = s2 / (2.0 * m as f64 * n);
    if !s1.is_finite() || !s2.is_finite() {
        return Err(Error::NonFinite("variance components".into()));
    }
    Ok((s1, s2, skipped))
}

/// Design rows `r = w` or `r = (w, h(w))` on `d`.
fn design_rows(d: &Dataset, aug: Option<&AugmentationFn>) -> (Vec<f64>, usize) {
    let k = d.p() + 1 + usize::from(aug.is_some());
    let mut rows = Vec::with_capacity(d.n() * k);
    for i in 0..d.n() {
        let w = d.w_row(i);
        rows.extend_from_slice(w);
        if let Some(h) = aug {
            rows.push(h.eval(w));
        }
    }
    (rows, k)
}

/// Plug-in of `E[π cov(r, μ(0,·) | A=0, π)] + E[(1−π) cov(r, μ(1,·) | A=1, π)]`
/// with `r = w`, or `r = (w, h(w))` when `aug` is given. Since `A ⟂ W | π`,
/// each conditional covariance is taken over all units as the product of
/// stratum-detrended residuals of `r` and the fitted `μ(a,·)`. Returns the
/// vector and the number of skipped strata.
pub fn estimate_c_vector(d: &Dataset, nf: &NuisanceFit, aug: Option<&AugmentationFn>) -> Result<(Vec<f64>, usize)> {
    let (p, key) = propensities(d, nf);
    let (rows, k) = design_rows(d, aug);
    let mut c = vec![0.0; k];
    let mut skipped = 0;
    // both fitted arms are available on every unit, so strata pool the arms
    // and no inverse-propensity weights are needed
    let all: Vec<usize> = (0..d.n()).collect();
    let strata = Strata::new(&key, &all);
    for mem in &strata.members {
        if mem.len() < 3 {
            skipped += 1;
            continue;
        }
        let x: Vec<f64> = mem.iter().map(|&i| key[i]).collect();
        let mu0: Vec<f64> = mem.iter().map(|&i| nf.mu(0, d.v_row(i))).collect();
        let mu1: Vec<f64> = mem.iter().map(|&i| nf.mu(1, d.v_row(i))).collect();
        let (e0, kd) = detrend(&x, &mu0);
        let (e1, _) = detrend(&x, &mu1);
        let dof_scale = mem.len() as f64 / mem.len().saturating_sub(kd).max(1) as f64;
        let mix: Vec<f64> = mem
            .iter()
            .enumerate()
            .map(|(t, &i)| p[i] * e0[t] + (1.0 - p[i]) * e1[t])
            .collect();
        for (j, cj) in c.iter_mut().enumerate() {
            let r: Vec<f64> = mem.iter().map(|&i| rows[i * k + j]).collect();
            let (r_res, _) = detrend(&x, &r);
            *cj += dof_scale * r_res.iter().zip(&mix).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    let n = d.n() as f64;
    c.iter_mut().for_each(|x| *x /= n);
    Ok((c, skipped))
}

/// Sample average of `π(1−π) r rᵀ` with `π` from the base model and `r` as
/// in [`estimate_c_vector`].
pub fn information(d: &Dataset, nf: &NuisanceFit, aug: Option<&AugmentationFn>) -> DMatrix<f64> {
    let (rows, k) = design_rows(d, aug);
    let mut info = DMatrix::<f64>::zeros(k, k);
    for (i, r) in rows.chunks_exact(k).enumerate() {
        let p = nf.pi(d.w_row(i));
        let wt = p * (1.0 - p);
        for a in 0..k {
            for b in 0..=a {
                info[(a, b)] += wt * r[a] * r[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            info[(b, a)] = info[(a, b)];
        }
    }
    info / d.n() as f64
}

/// `cᵀ 𝓘⁻¹ c` by a Cholesky solve.
pub fn gain(c: &[f64], info: &DMatrix<f64>) -> Result<f64> {
    if info.nrows() != c.len() || info.ncols() != c.len() {
        return Err(Error::DimensionMismatch(format!(
            "gain: vector of length {} with a {}x{} information matrix",
            c.len(),
            info.nrows(),
            info.ncols()
        )));
    }
    if !(equilibrated_condition(info) <= MAX_INFO_CONDITION) {
        return Err(Error::NotPositiveDefinite);
    }
    let chol = info.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let cv = DVector::from_column_slice(c);
    let g = cv.dot(&chol.solve(&cv));
    Ok(g.max(0.0))
}

/// Sample average of `π(1−π) h²`.
pub fn gain_h_direct(d: &Dataset, nf: &NuisanceFit, aug: &AugmentationFn) -> f64 {
    mean_pi_h2(d, nf, |w| aug.eval(w))
}

/// Sample average of `π(1−π) h²` with `h` built from `nf` itself.
pub fn gain_h_plugin(d: &Dataset, nf: &NuisanceFit) -> f64 {
    mean_pi_h2(d, nf, |w| nf.h(w))
}

fn mean_pi_h2(d: &Dataset, nf: &NuisanceFit, h: impl Fn(&[f64]) -> f64) -> f64 {
    (0..d.n())
        .map(|i| {
            let w = d.w_row(i);
            let p = nf.pi(w);
            p * (1.0 - p) * h(w).powi(2)
        })
        .sum::<f64>()
        / d.n() as f64
}

/// Plug-in of the nonparametric efficiency bound
/// `E[σ²(1,W)/π + σ²(0,W)/(1−π) + (μ(1,W) − μ(0,W) − ψ)²]`, with `ψ` the
/// sample mean of the fitted contrast.
pub fn np_bound(d: &Dataset, nf: &NuisanceFit, s2: &OutcomeVar) -> f64 {
    let n = d.n() as f64;
    let contrast: Vec<f64> = (0..d.n())
        .map(|i| nf.mu(1, d.v_row(i)) - nf.mu(0, d.v_row(i)))
        .collect();
    let psi = contrast.iter().sum::<f64>() / n;
    (0..d.n())
        .map(|i| {
            let v = d.v_row(i);
            let p = nf.pi(d.w_row(i));
            s2.eval(1, v) / p + s2.eval(0, v) / (1.0 - p) + (contrast[i] - psi).powi(2)
        })
        .sum::<f64>()
        / n
}

/// `δ_M` through its weighted-moment representation, with
/// `ζ(a, ·) = var(μ(a, W) | π)` estimated over strata of all units.
pub fn delta_m_display(d: &Dataset, nf: &NuisanceFit, s2: &OutcomeVar, m: usize) -> f64 {
    let (p, key) = propensities(d, nf);
    let all: Vec<usize> = (0..d.n()).collect();
    let strata = Strata::new(&key, &all);
    let zeta = [0u8, 1].map(|arm| {
        let mu: Vec<f64> = (0..d.n()).map(|i| nf.mu(arm, d.v_row(i))).collect();
        fill_gaps(stratum_variances(&strata, &key, &mu))
    });
    let mut total = 0.0;
    for (b, mem) in strata.members.iter().enumerate() {
        for &i in mem {
            let v = d.v_row(i);
            let pi = p[i];
            total += (1.0 / pi - pi) * (s2.eval(1, v) + zeta[1][b])
                + (1.0 / (1.0 - pi) - 1.0 + pi) * (s2.eval(0, v) + zeta[0][b]);
        }
    }
    total / (2.0 * m as f64 * d.n() as f64)
}

/// Two-sided Wald interval `psi ∓ z·√(sigma2 / n_eff)`.
pub fn wald_ci(psi: f64, sigma2: f64, n_eff: usize, level: f64) -> Result<(f64, f64)> {
    if !(sigma2 >= 0.0) {
        return Err(Error::InvalidArgument(format!("negative variance {sigma2}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("level must lie in (0, 1), got {level}")));
    }
    if n_eff == 0 {
        return Err(Error::InvalidArgument("effective sample size is zero".into()));
    }
    let z = Normal::standard().inverse_cdf((1.0 + level) / 2.0);
    let half = z * (sigma2 / n_eff as f64).sqrt();
    Ok((psi - half, psi + half))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceReport {
    pub sigma2_1: f64,
    pub sigma2_2m: f64,
    pub sigma2_m: f64,
    /// Variance reduction applied: `gain` of the augmentation used for
    /// matching, or `gain(∅)` without augmentation.
    pub gain: f64,
    pub gain_empty: f64,
    /// `E[π(1−π)h²]` with `h` built from the variance nuisances; estimates
    /// `gain(h₀)`.
    pub gain_h: f64,
    /// `cᵀ𝓘⁻¹c` for the design `(w, q(w))` with `q` the augmentation used.
    pub gain_h_c: Option<f64>,
    pub sigma2_adj: f64,
    pub sigma2_np: f64,
    /// `σ²_M − gain(h₀) − σ²_NP`.
    pub delta_m: f64,
    pub delta_m_display: f64,
    pub se: f64,
    pub ci: (f64, f64),
    pub level: f64,
    pub n_eff: usize,
    pub flags: Vec<String>,
}

/// Everything the report needs. `nf` must be fitted on (or be the truth
/// for) the units of `d`; `aug` is the augmentation used for matching,
/// which may come from other units.
pub struct VarianceInputs<'a> {
    pub d: &'a Dataset,
    pub nf: &'a NuisanceFit,
    pub aug: Option<&'a AugmentationFn>,
    pub m: usize,
    pub psi: f64,
    pub sbar: &'a CondVar,
    pub s2: &'a OutcomeVar,
    pub level: f64,
    pub n_eff: usize,
}

pub fn variance_report(inp: &VarianceInputs<'_>) -> Result<VarianceReport> {
    let VarianceInputs { d, nf, m, psi, .. } = *inp;
    let mut flags = Vec::new();
    let (sigma2_1, sigma2_2m, skipped) = sigma2_components(d, nf, m, inp.sbar, psi)?;
    let sigma2_m = sigma2_1 + sigma2_2m;

    let (c0, sk0) = estimate_c_vector(d, nf, None)?;
    let gain_empty = gain(&c0, &information(d, nf, None))?;
    let gain_h = gain_h_plugin(d, nf);
    let mut skipped_total = skipped + sk0;
    let gain_h_c = match inp.aug {
        Some(aug) => {
            let (ch, sk) = estimate_c_vector(d, nf, Some(aug))?;
            skipped_total += sk;
            match gain(&ch, &information(d, nf, Some(aug))) {
                Ok(g) => Some(g),
                Err(_) => {
                    flags.push("augmented_information_singular".to_string());
                    None
                }
            }
        }
        None => None,
    };
    if skipped_total > 0 {
        flags.push(format!("skipped_strata:{skipped_total}"));
    }

    let gain_used = gain_h_c.unwrap_or(gain_empty);
    let mut sigma2_adj = sigma2_m - gain_used;
    if sigma2_adj < 0.0 {
        flags.push("negative_adjusted_variance".to_string());
        sigma2_adj = 0.0;
    }
    let sigma2_np = np_bound(d, nf, inp.s2);
    let delta_m = sigma2_m - gain_h - sigma2_np;
    if delta_m < 0.0 {
        flags.push("negative_delta_m".to_string());
    }
    let delta_m_display = delta_m_display(d, nf, inp.s2, m);
    let ci = wald_ci(psi, sigma2_adj, inp.n_eff, inp.level)?;
    Ok(VarianceReport {
        sigma2_1,
        sigma2_2m,
        sigma2_m,
        gain: gain_used,
        gain_empty,
        gain_h,
        gain_h_c,
        sigma2_adj,
        sigma2_np,
        delta_m,
        delta_m_display,
        se: (sigma2_adj / inp.n_eff as f64).sqrt(),
        ci,
        level: inp.level,
        n_eff: inp.n_eff,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logit::{DesignSpec, PropensityFit};
    use crate::nuisance::{build_h, ReducedRegression};

    fn half_design(n: usize) -> Dataset {
        let v: Vec<f64> = (0..n).map(|i| (i % 10) as f64).collect();
        let a: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let y: Vec<f64> = (0..n).map(|i| i as f64 * 0.01).collect();
        Dataset::new(vec!["v".into()], v, a, y).unwrap()
    }

    fn constant_nf(d: &Dataset, mu1: f64, mu0: f64) -> NuisanceFit {
        let pi_fit = PropensityFit::from_coefficients(&DesignSpec::base(d), vec![0.0, 0.0]).unwrap();
        NuisanceFit::new(
            [Regressor::oracle(move |_| mu0), Regressor::oracle(move |_| mu1)],
            [
                ReducedRegression::oracle(move |_| mu0),
                ReducedRegression::oracle(move |_| mu1),
            ],
            pi_fit,
        )
    }

    #[test]
    fn constants_give_closed_form_components() {
        let d = half_design(40);
        let nf = constant_nf(&d, 3.0, 1.0);
        let s = 1.7f64;
        let sbar = CondVar::Known(Arc::new(move |_, _| s * s));
        let (s1, s2) = estimate_sigma2_m(&d, &nf, 1, &sbar, 2.0).unwrap();
        assert!((s1 - 4.0 * s * s).abs() < 1e-12);
        assert!((s2 - 1.5 * s * s).abs() < 1e-12);
        let (_, s2_4) = estimate_sigma2_m(&d, &nf, 4, &sbar, 2.0).unwrap();
        assert!((s2 / s2_4 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn np_bound_constants() {
        let d = half_design(40);
        let nf = constant_nf(&d, 3.0, 1.0);
        let s2 = OutcomeVar::Known(Arc::new(|_, _| 2.0));
        assert!((np_bound(&d, &nf, &s2) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn gain_simple_cases() {
        let id = DMatrix::<f64>::identity(2, 2);
        assert_eq!(gain(&[0.0, 0.0], &id).unwrap(), 0.0);
        assert!((gain(&[3.0, 4.0], &id).unwrap() - 25.0).abs() < 1e-12);
        let sing = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(gain(&[1.0, 0.0], &sing), Err(Error::NotPositiveDefinite)));
        assert!(gain(&[1.0], &id).is_err());
    }

    #[test]
    fn gain_h_zero_for_zero_h() {
        let d = half_design(30);
        let nf = Arc::new(constant_nf(&d, 1.0, 0.0));
        let h = build_h(nf.clone(), &d);
        assert_eq!(gain_h_direct(&d, &nf, &h), 0.0);
    }

    #[test]
    fn c_vector_vanishes_for_propensity_only_outcomes() {
        let n = 600;
        let v: Vec<f64> = (0..n)
            .flat_map(|i| [(i as f64 * 0.618).fract() * 4.0 - 2.0, (i % 2) as f64])
            .collect();
        let a: Vec<u8> = (0..n).map(|i| u8::from((i * 13) % 7 < 3)).collect();
        let d = Dataset::new(vec!["w1".into(), "w2".into()], v, a, vec![0.0; n]).unwrap();
        let pi_fit = PropensityFit::from_coefficients(&DesignSpec::base(&d), vec![0.1, 0.8, 0.0]).unwrap();
        let nf = NuisanceFit::new(
            [Regressor::oracle(|v| 2.0 * v[0]), Regressor::oracle(|v| 1.0 - v[0])],
            [ReducedRegression::oracle(|_| 0.0), ReducedRegression::oracle(|_| 0.0)],
            pi_fit,
        );
        let (c, skipped) = estimate_c_vector(&d, &nf, None).unwrap();
        assert_eq!(skipped, 0);
        assert!(c.iter().all(|x| x.abs() < 1e-10), "{c:?}");
    }

    #[test]
    fn wald_examples() {
        let (lo, hi) = wald_ci(0.0, 1.0, 1, 0.9545).unwrap();
        assert!((lo + 2.0).abs() < 1e-3 && (hi - 2.0).abs() < 1e-3);
        assert_eq!(wald_ci(1.5, 0.0, 10, 0.95).unwrap(), (1.5, 1.5));
        // se = 0.025 means sigma2 / n = 0.025²
        let (lo, hi) = wald_ci(-0.04, 0.025f64.powi(2), 1, 0.95).unwrap();
        assert!((lo + 0.089).abs() < 5e-4 && (hi - 0.009).abs() < 5e-4);
        assert!(wald_ci(0.0, -1.0, 1, 0.95).is_err());
        assert!(wald_ci(0.0, 1.0, 1, 1.0).is_err());
    }

    #[test]
    fn strata_cover_units_and_lookup() {
        let keys: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let units: Vec<usize> = (0..100).collect();
        let s = Strata::new(&keys, &units);
        assert_eq!(s.members.len(), 5);
        let mut all: Vec<usize> = s.members.concat();
        all.sort_unstable();
        assert_eq!(all, units);
        for (b, mem) in s.members.iter().enumerate() {
            for &i in mem {
                assert_eq!(s.locate(keys[i]), b);
            }
        }
        assert_eq!(s.locate(10.0), 4);
        assert_eq!(s.locate(-10.0), 0);
    }

    #[test]
    fn detrend_removes_lines() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let (r, k) = detrend(&x, &[1.0, 3.0, 5.0, 7.0]);
        assert_eq!(k, 2);
        assert!(r.iter().all(|v| v.abs() < 1e-12));
        let (r, k) = detrend(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]);
        assert_eq!(k, 1);
        assert_eq!(r, vec![-1.0, 0.0, 1.0]);
    }
}
