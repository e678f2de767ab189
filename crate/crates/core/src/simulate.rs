//! Data-generating mechanisms and a seeded, parallel Monte Carlo harness.
//!
//! Table scenarios draw `W₁ ~ U(−2, 2)`, `W₂ ~ Bernoulli(1/2)`, a logistic
//! treatment and Gaussian outcomes with unit variance. The Gaussian design
//! draws `W₁, W₂ ~ N(0, 1)`. Replication `r` uses stream `r` of a ChaCha8
//! generator keyed by the base seed, so its data depend only on
//! `(seed, r)`.

use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::AnalyticDesign;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::logit::{expit, logit, DesignSpec, PropensityFit};
use crate::nuisance::{NuisanceFit, ReducedRegression, Regressor};
use crate::pipeline::{estimate_augmented, estimate_unaugmented, EstimateResult, EstimatorConfig};
use crate::variance::{CondVar, OutcomeVar, VarianceReport};

/// Coefficients `(c₀, c₁, c₂)` on `(1, w₁, w₂)` for one table scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TableScenario {
    pub id: u8,
    pub logit: [f64; 3],
    pub mu1: [f64; 3],
    pub mu0: [f64; 3],
}

const TABLE: [TableScenario; 4] = [
    TableScenario {
        id: 1,
        logit: [0.2, 1.5, -1.0],
        mu1: [2.0, 4.0, -3.0],
        mu0: [1.0, 3.0, 3.0],
    },
    TableScenario {
        id: 2,
        logit: [0.2, 1.5, 0.0],
        mu1: [2.0, 4.0, -3.0],
        mu0: [1.0, 3.0, 3.0],
    },
    TableScenario {
        id: 3,
        logit: [0.2, 1.5, -1.0],
        mu1: [2.0, 0.0, -3.0],
        mu0: [1.0, 0.0, 3.0],
    },
    TableScenario {
        id: 4,
        logit: [0.2, 1.5, -0.1],
        mu1: [2.0, 0.1, -3.0],
        mu0: [1.0, 0.1, 3.0],
    },
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scenario {
    Table(TableScenario),
    Analytic(AnalyticDesign),
}

fn lin(c: &[f64; 3], w1: f64, w2: f64) -> f64 {
    c[0] + c[1] * w1 + c[2] * w2
}

impl Scenario {
    /// Table scenario 1 to 4.
    pub fn table(id: u8) -> Result<Self> {
        TABLE
            .iter()
            .find(|s| s.id == id)
            .map(|s| Scenario::Table(*s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown scenario {id}; expected 1-4")))
    }

    /// Gaussian design with `θ = (0, 1, 0)`, `β = (1, 1, 1)`, `γ = (0, 1, 1)`,
    /// `σ = 1`, `M = 1`.
    pub fn analytic_default() -> Self {
        Scenario::Analytic(AnalyticDesign {
            theta: [0.0, 1.0, 0.0],
            beta: [1.0, 1.0, 1.0],
            gamma: [0.0, 1.0, 1.0],
            sigma: 1.0,
            m: 1,
        })
    }

    pub fn name(&self) -> String {
        match self {
            Scenario::Table(t) => t.id.to_string(),
            Scenario::Analytic(_) => "analytic".to_string(),
        }
    }

    pub fn sigma(&self) -> f64 {
        match self {
            Scenario::Table(_) => 1.0,
            Scenario::Analytic(a) => a.sigma,
        }
    }

    fn coefs(&self) -> ([f64; 3], [f64; 3], [f64; 3]) {
        match self {
            Scenario::Table(t) => (t.logit, t.mu1, t.mu0),
            Scenario::Analytic(a) => (a.theta, a.beta, a.gamma),
        }
    }

    /// Linear index of the true propensity at covariates `v = (w₁, w₂)`.
    pub fn propensity_index(&self, v: &[f64]) -> f64 {
        lin(&self.coefs().0, v[0], v[1])
    }

    /// True `μ(a, v)`.
    pub fn mu(&self, a: u8, v: &[f64]) -> f64 {
        let (_, m1, m0) = self.coefs();
        lin(if a == 1 { &m1 } else { &m0 }, v[0], v[1])
    }

    /// True average treatment effect.
    pub fn true_ate(&self) -> f64 {
        match self {
            // E W₁ = 0, E W₂ = 1/2
            Scenario::Table(t) => (t.mu1[0] - t.mu0[0]) + 0.5 * (t.mu1[2] - t.mu0[2]),
            Scenario::Analytic(a) => a.ate(),
        }
    }

    /// Mean and variance of `μ(a, W)` given the propensity index `eta`.
    pub fn conditional_mu_moments(&self, a: u8, eta: f64) -> (f64, f64) {
        match self {
            Scenario::Analytic(dz) => {
                let c = if a == 1 { dz.beta } else { dz.gamma };
                let [_, t1, t2] = dz.theta;
                let ss = t1 * t1 + t2 * t2;
                let total = c[1] * c[1] + c[2] * c[2];
                if ss == 0.0 {
                    return (c[0], total);
                }
                let proj = (c[1] * t1 + c[2] * t2).powi(2) / ss;
                (dz.mu_bar_index(a, eta), total - proj)
            }
            Scenario::Table(t) => {
                let c = if a == 1 { t.mu1 } else { t.mu0 };
                let [t0, t1, t2] = t.logit;
                // W₂ takes two values; each fixes W₁ on the index level set,
                // which is admissible when inside the support of W₁
                let cands: Vec<f64> = [0.0, 1.0]
                    .iter()
                    .filter_map(|&w2| {
                        let w1 = (eta - t0 - t2 * w2) / t1;
                        (w1.abs() <= 2.0).then(|| lin(&c, w1, w2))
                    })
                    .collect();
                match cands.as_slice() {
                    [] => {
                        let w1 = ((eta - t0 - 0.5 * t2) / t1).clamp(-2.0, 2.0);
                        (lin(&c, w1, 0.5), 0.0)
                    }
                    [x] => (*x, 0.0),
                    [x, y] => {
                        let mean = 0.5 * (x + y);
                        (mean, 0.25 * (x - y) * (x - y))
                    }
                    _ => unreachable!(),
                }
            }
        }
    }

    /// The true nuisance functions, for oracle variance computations.
    pub fn oracle_nuisance(&self) -> NuisanceFit {
        let (theta, _, _) = self.coefs();
        let design = DesignSpec::from_rows(vec![1.0, 0.0, 0.0], 3).expect("fixed width");
        let pi_fit = PropensityFit::from_coefficients(&design, theta.to_vec()).expect("fixed width");
        let s = *self;
        let mu = [0u8, 1].map(|a| Regressor::oracle(move |v| s.mu(a, v)));
        let mu_bar = [0u8, 1].map(|a| ReducedRegression::oracle(move |p| s.conditional_mu_moments(a, logit(p)).0));
        NuisanceFit::new(mu, mu_bar, pi_fit)
    }

    /// True `σ̄²(a, p) = σ² + var(μ(a, W) | π = p)`.
    pub fn oracle_sbar(&self) -> CondVar {
        let s = *self;
        let s2 = self.sigma().powi(2);
        CondVar::Known(Arc::new(move |a, p| s2 + s.conditional_mu_moments(a, logit(p)).1))
    }

    /// True `σ²(a, w) = σ²`.
    pub fn oracle_s2(&self) -> OutcomeVar {
        let s2 = self.sigma().powi(2);
        OutcomeVar::Known(Arc::new(move |_, _| s2))
    }
}

/// Draws `n` units using `rng`.
pub fn gen_with_rng(s: &Scenario, n: usize, rng: &mut impl Rng) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 units, got {n}")));
    }
    let sigma = s.sigma();
    let mut v = Vec::with_capacity(2 * n);
    let mut a = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let (w1, w2) = match s {
            Scenario::Table(_) => (rng.random_range(-2.0..2.0), f64::from(u8::from(rng.random_bool(0.5)))),
            Scenario::Analytic(_) => (rng.sample(StandardNormal), rng.sample(StandardNormal)),
        };
        let vi = [w1, w2];
        let ai = u8::from(rng.random::<f64>() < expit(s.propensity_index(&vi)));
        let eps: f64 = rng.sample(StandardNormal);
        v.extend(vi);
        y.push(s.mu(ai, &vi) + sigma * eps);
        a.push(ai);
    }
    Dataset::new(vec!["w1".into(), "w2".into()], v, a, y)
}

pub fn gen_scenario(s: &Scenario, n: usize, seed: u64) -> Result<Dataset> {
    gen_with_rng(s, n, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Generator for replication `rep` under base seed `seed`.
pub fn replication_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimators {
    Unaugmented,
    Augmented,
    Both,
}

impl Estimators {
    fn unaug(self) -> bool {
        self != Estimators::Augmented
    }

    fn aug(self) -> bool {
        self != Estimators::Unaugmented
    }
}

#[derive(Debug, Clone)]
pub struct McConfig {
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub estimator: EstimatorConfig,
    pub which: Estimators,
    /// Worker cap; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

/// Outcome of one estimator on one replication.
#[derive(Debug, Clone)]
pub struct RepEstimate {
    pub psi: f64,
    pub n_eff: usize,
    pub variance: VarianceReport,
    pub augmented: bool,
    pub flags: Vec<String>,
}

impl From<EstimateResult> for RepEstimate {
    fn from(r: EstimateResult) -> Self {
        Self {
            psi: r.psi,
            n_eff: r.n_eff,
            augmented: r.augmented(),
            variance: r.variance,
            flags: r.flags,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RepRecord {
    pub rep: usize,
    pub unaug: Option<RepEstimate>,
    pub aug: Option<RepEstimate>,
    pub error: Option<String>,
}

impl RepRecord {
    /// Interval of the augmented estimator when it ran, else the
    /// unaugmented one.
    pub fn headline(&self) -> Option<&RepEstimate> {
        self.aug.as_ref().or(self.unaug.as_ref())
    }
}

/// Monte Carlo standard errors of the summary fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McSe {
    pub mean_psi: f64,
    pub bias: f64,
    pub emp_var_scaled: f64,
    pub mean_theor_var: f64,
    pub coverage: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McSummary {
    pub reps: usize,
    pub mean_psi: f64,
    pub bias: f64,
    /// `n_eff` times the across-replication variance of the estimates.
    pub emp_var_scaled: f64,
    /// Mean of the plug-in asymptotic variance.
    pub mean_theor_var: f64,
    pub coverage: f64,
    pub mc_se: McSe,
}

/// `1 − var(aug)/var(unaug)` from paired replications.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceReduction {
    pub reduction: f64,
    pub se: f64,
}

#[derive(Debug, Clone)]
pub struct McRun {
    pub scenario: Scenario,
    pub true_psi: f64,
    pub records: Vec<RepRecord>,
    pub failed: usize,
    pub unaugmented: Option<McSummary>,
    pub augmented: Option<McSummary>,
    pub reduction: Option<VarianceReduction>,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Summary over replication estimates; needs at least two.
pub fn summarize(est: &[&RepEstimate], true_psi: f64) -> Result<McSummary> {
    let r = est.len();
    if r < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 replications, got {r}")));
    }
    let rf = r as f64;
    let psi: Vec<f64> = est.iter().map(|e| e.psi).collect();
    let theor: Vec<f64> = est.iter().map(|e| e.variance.sigma2_adj).collect();
    let n_eff = mean(&est.iter().map(|e| e.n_eff as f64).collect::<Vec<_>>());
    let covered = est
        .iter()
        .filter(|e| e.variance.ci.0 <= true_psi && true_psi <= e.variance.ci.1)
        .count() as f64;
    let mean_psi = mean(&psi);
    let s2 = var(&psi);
    let m4 = psi.iter().map(|v| (v - mean_psi).powi(4)).sum::<f64>() / rf;
    let coverage = covered / rf;
    let se_psi = (s2 / rf).sqrt();
    Ok(McSummary {
        reps: r,
        mean_psi,
        bias: mean_psi - true_psi,
        emp_var_scaled: n_eff * s2,
        mean_theor_var: mean(&theor),
        coverage,
        mc_se: McSe {
            mean_psi: se_psi,
            bias: se_psi,
            emp_var_scaled: n_eff * ((m4 - s2 * s2).max(0.0) / rf).sqrt(),
            mean_theor_var: (var(&theor) / rf).sqrt(),
            coverage: (coverage * (1.0 - coverage) / rf).sqrt(),
        },
    })
}

/// Paired delta-method estimate of `1 − var(x_aug)/var(x_unaug)`.
pub fn variance_reduction(aug: &[f64], unaug: &[f64]) -> VarianceReduction {
    let r = aug.len() as f64;
    let (ma, mu) = (mean(aug), mean(unaug));
    let (va, vu) = (var(aug), var(unaug));
    let infl: Vec<f64> = aug
        .iter()
        .zip(unaug)
        .map(|(a, u)| ((a - ma).powi(2) - va) / va - ((u - mu).powi(2) - vu) / vu)
        .collect();
    let ratio = va / vu;
    let se_log = (infl.iter().map(|x| x * x).sum::<f64>() / (r - 1.0) / r).sqrt();
    VarianceReduction {
        reduction: 1.0 - ratio,
        se: ratio * se_log,
    }
}

fn run_rep(s: &Scenario, cfg: &McConfig, rep: usize) -> RepRecord {
    let mut rng = replication_rng(cfg.seed, rep as u64);
    let mut attempt = || -> Result<(Option<RepEstimate>, Option<RepEstimate>)> {
        let d = gen_with_rng(s, cfg.n, &mut rng)?;
        let est = EstimatorConfig {
            seed: rng.random::<u64>(),
            ..cfg.estimator.clone()
        };
        let unaug = if cfg.which.unaug() {
            Some(estimate_unaugmented(&d, &est)?.into())
        } else {
            None
        };
        let aug = if cfg.which.aug() {
            Some(estimate_augmented(&d, &est)?.into())
        } else {
            None
        };
        Ok((unaug, aug))
    };
    match attempt() {
        Ok((unaug, aug)) => RepRecord {
            rep,
            unaug,
            aug,
            error: None,
        },
        Err(e) => RepRecord {
            rep,
            unaug: None,
            aug: None,
            error: Some(e.to_string()),
        },
    }
}

/// Runs `cfg.reps` replications in parallel and summarizes them. Fails when
/// more than 1% of replications error.
pub fn run_mc(s: &Scenario, cfg: &McConfig) -> Result<McRun> {
    if cfg.reps < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 replications, got {}",
            cfg.reps
        )));
    }
    cfg.estimator.validate()?;
    if cfg.n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 units, got {}", cfg.n)));
    }
    let e = &cfg.estimator;
    if cfg.which != Estimators::Unaugmented && e.split_frac > 0.0 {
        let m_n = (e.split_frac * cfg.n as f64).round() as usize;
        if m_n < e.split_floor.max(1) {
            return Err(Error::InvalidArgument(format!(
                "split leaves {m_n} fitting units, below the floor of {}; raise n or the split fraction, or pass 0",
                e.split_floor
            )));
        }
    }
    let work = || -> Vec<RepRecord> { (0..cfg.reps).into_par_iter().map(|r| run_rep(s, cfg, r)).collect() };
    let records = match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };
    let failed = records.iter().filter(|r| r.error.is_some()).count();
    if failed * 100 > cfg.reps {
        let first = records.iter().find_map(|r| r.error.clone()).unwrap_or_default();
        return Err(Error::TooManyFailures {
            failed,
            reps: cfg.reps,
            first,
        });
    }
    let true_psi = s.true_ate();
    let ok: Vec<&RepRecord> = records.iter().filter(|r| r.error.is_none()).collect();
    let unaug: Vec<&RepEstimate> = ok.iter().filter_map(|r| r.unaug.as_ref()).collect();
    let aug: Vec<&RepEstimate> = ok.iter().filter_map(|r| r.aug.as_ref()).collect();
    let unaugmented = (!unaug.is_empty()).then(|| summarize(&unaug, true_psi)).transpose()?;
    let augmented = (!aug.is_empty()).then(|| summarize(&aug, true_psi)).transpose()?;
    let reduction = (cfg.which == Estimators::Both && ok.len() >= 2).then(|| {
        let a: Vec<f64> = aug.iter().map(|e| e.psi).collect();
        let u: Vec<f64> = unaug.iter().map(|e| e.psi).collect();
        variance_reduction(&a, &u)
    });
    Ok(McRun {
        scenario: *s,
        true_psi,
        records,
        failed,
        unaugmented,
        augmented,
        reduction,
    })
}

/// Per-replication CSV with columns
/// `rep, psi_aug, psi_unaug, var_aug, var_unaug, ci_lo, ci_hi, covered`.
/// Intervals refer to the augmented estimator when it ran. Missing values
/// are left empty.
pub fn write_reps_csv<W: Write>(w: W, run: &McRun) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record([
        "rep",
        "psi_aug",
        "psi_unaug",
        "var_aug",
        "var_unaug",
        "ci_lo",
        "ci_hi",
        "covered",
    ])?;
    let f = |x: Option<f64>| x.map_or_else(String::new, |v| v.to_string());
    for r in &run.records {
        let head = r.headline();
        let ci = head.map(|e| e.variance.ci);
        let covered = ci.map(|(lo, hi)| u8::from(lo <= run.true_psi && run.true_psi <= hi));
        wr.write_record([
            r.rep.to_string(),
            f(r.aug.as_ref().map(|e| e.psi)),
            f(r.unaug.as_ref().map(|e| e.psi)),
            f(r.aug.as_ref().map(|e| e.variance.sigma2_adj)),
            f(r.unaug.as_ref().map(|e| e.variance.sigma2_adj)),
            f(ci.map(|c| c.0)),
            f(ci.map(|c| c.1)),
            covered.map_or_else(String::new, |c| c.to_string()),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn true_effects() {
        for id in 1..=4 {
            assert_eq!(Scenario::table(id).unwrap().true_ate(), -2.0);
        }
        assert_eq!(Scenario::analytic_default().true_ate(), 1.0);
        assert!(Scenario::table(9).is_err());
    }

    #[test]
    fn table_coefficients() {
        let Scenario::Table(t) = Scenario::table(4).unwrap() else {
            unreachable!()
        };
        assert_eq!(t.logit, [0.2, 1.5, -0.1]);
        assert_eq!(t.mu1, [2.0, 0.1, -3.0]);
        assert_eq!(t.mu0, [1.0, 0.1, 3.0]);
    }

    #[test]
    fn generation_is_deterministic_and_in_support() {
        let s = Scenario::table(1).unwrap();
        let d1 = gen_scenario(&s, 300, 8).unwrap();
        let d2 = gen_scenario(&s, 300, 8).unwrap();
        assert_eq!(d1, d2);
        assert_ne!(d1, gen_scenario(&s, 300, 9).unwrap());
        for i in 0..d1.n() {
            let v = d1.v_row(i);
            assert!(v[0].abs() <= 2.0 && (v[1] == 0.0 || v[1] == 1.0));
        }
    }

    #[test]
    fn replication_streams_differ() {
        let s = Scenario::table(2).unwrap();
        let a = gen_with_rng(&s, 50, &mut replication_rng(1, 0)).unwrap();
        let b = gen_with_rng(&s, 50, &mut replication_rng(1, 1)).unwrap();
        assert_ne!(a, b);
        assert_eq!(a, gen_with_rng(&s, 50, &mut replication_rng(1, 0)).unwrap());
    }

    #[test]
    fn conditional_moments_scenario_two() {
        // π depends on w₁ only, so μ̄ averages over w₂ ∈ {0, 1}
        let s = Scenario::table(2).unwrap();
        let eta = 0.2 + 1.5 * 0.4;
        let (m, v) = s.conditional_mu_moments(1, eta);
        assert!((m - (2.0 + 1.6 - 1.5)).abs() < 1e-12);
        assert!((v - 2.25).abs() < 1e-12);
    }

    #[test]
    fn conditional_moments_scenario_one_edges() {
        let s = Scenario::table(1).unwrap();
        // only w₂ = 0 is admissible: w₁ = 1.9 with w₂ = 1 would need w₁ > 2
        let eta = 0.2 + 1.5 * 1.9;
        let (m, v) = s.conditional_mu_moments(0, eta);
        assert!((m - (1.0 + 3.0 * 1.9)).abs() < 1e-12);
        assert_eq!(v, 0.0);
    }

    #[test]
    fn summary_on_constant_estimates() {
        let rep = |psi: f64| RepEstimate {
            psi,
            n_eff: 100,
            variance: VarianceReport {
                sigma2_1: 1.0,
                sigma2_2m: 0.0,
                sigma2_m: 1.0,
                gain: 0.0,
                gain_empty: 0.0,
                gain_h: 0.0,
                gain_h_c: None,
                sigma2_adj: 1.0,
                sigma2_np: 1.0,
                delta_m: 0.0,
                delta_m_display: 0.0,
                se: 0.1,
                ci: (psi - 0.2, psi + 0.2),
                level: 0.95,
                n_eff: 100,
                flags: vec![],
            },
            augmented: false,
            flags: vec![],
        };
        let reps = [rep(0.0), rep(0.1), rep(-0.1), rep(0.3)];
        let refs: Vec<&RepEstimate> = reps.iter().collect();
        let s = summarize(&refs, 0.0).unwrap();
        assert!((s.mean_psi - 0.075).abs() < 1e-12);
        assert_eq!(s.coverage, 0.75);
        assert!(s.emp_var_scaled > 0.0);
        assert!(summarize(&refs[..1], 0.0).is_err());
    }

    #[test]
    fn smoke_run() {
        let cfg = McConfig {
            n: 400,
            reps: 2,
            seed: 3,
            estimator: EstimatorConfig {
                split_frac: 0.0,
                ..Default::default()
            },
            which: Estimators::Both,
            threads: Some(2),
        };
        let run = run_mc(&Scenario::table(2).unwrap(), &cfg).unwrap();
        let u = run.unaugmented.unwrap();
        let a = run.augmented.unwrap();
        assert_eq!(u.reps, 2);
        assert!(u.emp_var_scaled.is_finite() && a.mean_theor_var.is_finite());
        let mut buf = Vec::new();
        write_reps_csv(&mut buf, &run).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("rep,psi_aug,psi_unaug,var_aug,var_unaug,ci_lo,ci_hi,covered\n"));
        assert_eq!(text.lines().count(), 3);
    }
}
