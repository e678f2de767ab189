//! End-to-end estimators: matching on the fitted base propensity model, and
//! matching on the propensity model augmented with the fitted optimal
//! covariate `h`, with or without sample splitting.

use std::sync::Arc;

use serde::Serialize;

use crate::data::{split_sample_with_floor, Dataset, SplitIndex, DEFAULT_SPLIT_FLOOR};
use crate::error::{Error, Result};
use crate::logit::{fit_mle, DesignSpec, PropensityFit};
use crate::matching::{ate_matching, match_1m};
use crate::nuisance::{
    build_h, fit_nuisance, fit_nuisance_given_pi, AugmentationFn, HDiagnostics, NuisanceFit, NuisanceSpec,
    RegressorSpec,
};
use crate::variance::{variance_report, CondVar, OutcomeVar, VarianceInputs, VarianceReport};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorConfig {
    /// Number of matches per unit.
    pub m: usize,
    /// Grid constant `k` for rounding the fitted coefficients; `None` uses
    /// the raw maximum-likelihood fit.
    pub disc_k: Option<f64>,
    /// Fraction of units used to fit `h`; 0 fits everything on the full
    /// sample.
    pub split_frac: f64,
    /// Smallest allowed nuisance-fitting subsample.
    pub split_floor: usize,
    pub level: f64,
    pub nuisance: NuisanceSpec,
    /// Regressors for `σ²(a, w)`.
    pub outcome_var: RegressorSpec,
    pub seed: u64,
    /// Diagnostic: match on the augmented design with its coefficient on
    /// `h` forced to zero.
    pub fix_gamma_zero: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            m: 1,
            disc_k: None,
            split_frac: 0.05,
            split_floor: DEFAULT_SPLIT_FLOOR,
            level: 0.95,
            nuisance: NuisanceSpec::default(),
            outcome_var: RegressorSpec::outcome_default(),
            seed: 0,
            fix_gamma_zero: false,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidArgument("number of matches must be >= 1".into()));
        }
        if !(0.0..=0.5).contains(&self.split_frac) {
            return Err(Error::InvalidArgument(format!(
                "split fraction must lie in [0, 0.5], got {}",
                self.split_frac
            )));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "level must lie in (0, 1), got {}",
                self.level
            )));
        }
        if let Some(k) = self.disc_k {
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "discretization constant must be positive, got {k}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateResult {
    pub psi: f64,
    pub variance: VarianceReport,
    pub fit_base: PropensityFit,
    pub fit_aug: Option<PropensityFit>,
    pub h_diag: Option<HDiagnostics>,
    #[serde(skip)]
    pub split: Option<SplitIndex>,
    pub n_eff: usize,
    pub flags: Vec<String>,
    /// Units of the input that were matched (all of them unless split).
    #[serde(skip)]
    pub matched_units: Vec<usize>,
    /// Matching scores, aligned with `matched_units`.
    #[serde(skip)]
    pub scores: Vec<f64>,
    /// `h` on the matched units, when it was fitted.
    #[serde(skip)]
    pub h_values: Option<Vec<f64>>,
}

impl EstimateResult {
    pub fn augmented(&self) -> bool {
        self.fit_aug.is_some()
    }
}

fn maybe_discretize(fit: PropensityFit, design: &DesignSpec, cfg: &EstimatorConfig) -> Result<PropensityFit> {
    match cfg.disc_k {
        Some(k) => fit.discretized(design, k, design.n()),
        None => Ok(fit),
    }
}

fn finish_variance(
    d: &Dataset,
    nf: &NuisanceFit,
    aug: Option<&AugmentationFn>,
    psi: f64,
    cfg: &EstimatorConfig,
) -> Result<VarianceReport> {
    let s2 = OutcomeVar::fit(d, nf, &cfg.outcome_var)?;
    variance_report(&VarianceInputs {
        d,
        nf,
        aug,
        m: cfg.m,
        psi,
        sbar: &CondVar::Stratified,
        s2: &s2,
        level: cfg.level,
        n_eff: d.n(),
    })
}

/// Fits the base logistic model, optionally rounds its coefficients, and
/// matches on the fitted scores. The reported variance subtracts `gain(∅)`.
pub fn estimate_unaugmented(d: &Dataset, cfg: &EstimatorConfig) -> Result<EstimateResult> {
    cfg.validate()?;
    d.require_arms(cfg.m)?;
    let design = DesignSpec::base(d);
    let fit = maybe_discretize(fit_mle(&design, d.a())?, &design, cfg)?;
    let mr = match_1m(&fit.scores, d.a(), cfg.m)?;
    let psi = ate_matching(d.y(), d.a(), &mr)?;

    let nf = Arc::new(fit_nuisance_given_pi(d, &cfg.nuisance, fit.clone())?);
    let aug = build_h(nf.clone(), d);
    let variance = finish_variance(d, &nf, None, psi, cfg)?;
    Ok(EstimateResult {
        psi,
        variance,
        scores: fit.scores.clone(),
        fit_base: fit,
        fit_aug: None,
        h_diag: Some(aug.diag),
        split: None,
        n_eff: d.n(),
        flags: Vec::new(),
        matched_units: (0..d.n()).collect(),
        h_values: None,
    })
}

/// Fits `h` on the nuisance subsample (or the full sample when
/// `split_frac = 0`), fits the logistic model on `(w, h(w))` over the
/// estimation subsample and matches there. The reported variance subtracts
/// `gain(ĥ)`. A collinear augmentation column drops back to the base model
/// and is flagged.
pub fn estimate_augmented(d: &Dataset, cfg: &EstimatorConfig) -> Result<EstimateResult> {
    cfg.validate()?;
    d.require_arms(cfg.m)?;
    let (split, da, db) = if cfg.split_frac > 0.0 {
        let s = split_sample_with_floor(d, cfg.split_frac, cfg.seed, cfg.split_floor)?;
        let da = d.subset(&s.idx_a)?;
        let db = d.subset(&s.idx_b)?;
        (Some(s), Some(da), db)
    } else {
        (None, None, d.clone())
    };
    db.require_arms(cfg.m)?;
    let mut flags = Vec::new();

    let base_design = DesignSpec::base(&db);
    let fit_base = fit_mle(&base_design, db.a())?;
    let nf_a = match &da {
        Some(da) => Arc::new(fit_nuisance(da, &cfg.nuisance)?),
        None => Arc::new(fit_nuisance_given_pi(&db, &cfg.nuisance, fit_base.clone())?),
    };
    let aug = build_h(nf_a.clone(), da.as_ref().unwrap_or(&db));
    let h_b = aug.eval_all(&db);

    let aug_design = DesignSpec::augmented(&db, &h_b)?;
    let fit_aug = if cfg.fix_gamma_zero {
        let mut coef = fit_base.vartheta.clone();
        coef.push(0.0);
        Some(PropensityFit::from_coefficients(&aug_design, coef)?)
    } else {
        match fit_mle(&aug_design, db.a()) {
            Ok(f) => Some(f),
            Err(Error::RankDeficient { .. }) => {
                flags.push("augmentation_dropped".to_string());
                None
            }
            Err(e) => return Err(e),
        }
    };
    let fit_aug = match fit_aug {
        Some(f) => Some(maybe_discretize(f, &aug_design, cfg)?),
        None => None,
    };
    let fit_base = maybe_discretize(fit_base, &base_design, cfg)?;
    let scores = fit_aug.as_ref().map_or(&fit_base.scores, |f| &f.scores).clone();
    let mr = match_1m(&scores, db.a(), cfg.m)?;
    let psi = ate_matching(db.y(), db.a(), &mr)?;

    let nf_b = match &da {
        Some(_) => Arc::new(fit_nuisance_given_pi(&db, &cfg.nuisance, fit_base.clone())?),
        None => nf_a.clone(),
    };
    let variance = finish_variance(&db, &nf_b, fit_aug.is_some().then_some(&aug), psi, cfg)?;
    let matched_units = split.as_ref().map_or_else(|| (0..d.n()).collect(), |s| s.idx_b.clone());
    Ok(EstimateResult {
        psi,
        variance,
        fit_base,
        fit_aug,
        h_diag: Some(aug.diag),
        split,
        n_eff: db.n(),
        flags,
        matched_units,
        scores,
        h_values: Some(h_b),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy(n: usize, seed: u64, prognostic: bool) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = Vec::with_capacity(2 * n);
        let mut a = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let w1: f64 = rng.random_range(-2.0..2.0);
            let w2 = f64::from(u8::from(rng.random::<bool>()));
            let p = crate::logit::expit(0.2 + 1.5 * w1);
            let t = u8::from(rng.random::<f64>() < p);
            let noise: f64 = rng.random_range(-1.0..1.0);
            let mean = if prognostic {
                if t == 1 {
                    2.0 + 4.0 * w1 - 3.0 * w2
                } else {
                    1.0 + 3.0 * w1 + 3.0 * w2
                }
            } else {
                f64::from(t)
            };
            v.extend([w1, w2]);
            a.push(t);
            y.push(mean + noise);
        }
        Dataset::new(vec!["w1".into(), "w2".into()], v, a, y).unwrap()
    }

    #[test]
    fn config_validation() {
        let ok = EstimatorConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            EstimatorConfig { m: 0, ..ok.clone() },
            EstimatorConfig {
                split_frac: 0.6,
                ..ok.clone()
            },
            EstimatorConfig {
                level: 1.0,
                ..ok.clone()
            },
            EstimatorConfig {
                disc_k: Some(0.0),
                ..ok.clone()
            },
        ] {
            assert!(bad.validate().unwrap_err().is_validation());
        }
    }

    #[test]
    fn gamma_zero_reproduces_unaugmented() {
        let d = toy(400, 3, true);
        let cfg = EstimatorConfig {
            split_frac: 0.0,
            fix_gamma_zero: true,
            ..Default::default()
        };
        let un = estimate_unaugmented(&d, &cfg).unwrap();
        let au = estimate_augmented(&d, &cfg).unwrap();
        assert_eq!(un.psi, au.psi);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let d = toy(1200, 5, true);
        let cfg = EstimatorConfig {
            seed: 11,
            ..Default::default()
        };
        let r1 = estimate_augmented(&d, &cfg).unwrap();
        let r2 = estimate_augmented(&d, &cfg).unwrap();
        assert_eq!(r1.psi.to_bits(), r2.psi.to_bits());
        assert_eq!(r1.variance, r2.variance);
        assert_eq!(r1.split, r2.split);
        assert_eq!(r1.n_eff, 1200 - 60);
    }

    #[test]
    fn split_result_shapes() {
        let d = toy(1200, 9, true);
        let cfg = EstimatorConfig {
            m: 2,
            disc_k: Some(2.0),
            seed: 4,
            ..Default::default()
        };
        let r = estimate_augmented(&d, &cfg).unwrap();
        assert!(r.augmented());
        assert_eq!(r.scores.len(), r.n_eff);
        assert_eq!(r.matched_units.len(), r.n_eff);
        assert!(r.fit_aug.as_ref().unwrap().disc.is_some());
        let v = &r.variance;
        assert!(v.gain >= 0.0 && v.sigma2_adj <= v.sigma2_m);
        assert!((v.sigma2_m - v.sigma2_1 - v.sigma2_2m).abs() < 1e-12);
        assert!(v.ci.0 < r.psi && r.psi < v.ci.1, "{v:?}");
    }

    #[test]
    fn unprognostic_outcome_gives_small_h() {
        let d = toy(1500, 21, false);
        let cfg = EstimatorConfig {
            split_frac: 0.0,
            ..Default::default()
        };
        let au = estimate_augmented(&d, &cfg).unwrap();
        let un = estimate_unaugmented(&d, &cfg).unwrap();
        assert!(au.h_diag.unwrap().variance < 0.05);
        let se = un.variance.se.max(au.variance.se);
        assert!((au.psi - un.psi).abs() < 3.0 * se);
    }

    #[test]
    fn separated_two_units_error() {
        let d = Dataset::new(vec!["v".into()], vec![0.6, 0.5], vec![1, 0], vec![3.0, 1.0]).unwrap();
        let err = estimate_unaugmented(&d, &EstimatorConfig::default()).unwrap_err();
        assert!(!err.is_validation());
    }
}
