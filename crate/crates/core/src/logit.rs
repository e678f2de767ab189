//! Logistic-regression propensity model: maximum likelihood by Newton's
//! method, score and information quantities, and the grid discretization of
//! fitted coefficients.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::equilibrated_condition;

/// Fitted scores are clamped to `[CLAMP_LO, CLAMP_HI]` wherever they are used
/// as divisors.
pub const CLAMP_LO: f64 = 1e-6;
pub const CLAMP_HI: f64 = 1.0 - 1e-6;

pub const GRAD_TOL: f64 = 1e-10;
/// Accepted score max-norm when the line search stalls at rounding level.
pub const GRAD_FLOOR_TOL: f64 = 1e-8;
pub const MAX_ITER: usize = 100;
pub const SEPARATION_BOUND: f64 = 30.0;
pub const MAX_CONDITION: f64 = 1e10;

pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn clamp_score(p: f64) -> f64 {
    p.clamp(CLAMP_LO, CLAMP_HI)
}

/// log(1 + e^x) without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Rows `r(w)` of the propensity design: the base rows `w = (1, v)`,
/// optionally followed by an augmentation column `h(w)`.
#[derive(Debug, Clone)]
pub struct DesignSpec {
    rows: Vec<f64>,
    n: usize,
    dim: usize,
    augmented: bool,
}

impl DesignSpec {
    pub fn base(d: &Dataset) -> Self {
        let dim = d.p() + 1;
        let rows = (0..d.n()).flat_map(|i| d.w_row(i).to_vec()).collect();
        Self {
            rows,
            n: d.n(),
            dim,
            augmented: false,
        }
    }

    /// Base rows with `h[i]` appended to row `i`.
    pub fn augmented(d: &Dataset, h: &[f64]) -> Result<Self> {
        if h.len() != d.n() {
            return Err(Error::DimensionMismatch(format!(
                "augmentation column has {} values for {} units",
                h.len(),
                d.n()
            )));
        }
        if h.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("augmentation column".into()));
        }
        let dim = d.p() + 2;
        let mut rows = Vec::with_capacity(d.n() * dim);
        for (i, &hi) in h.iter().enumerate() {
            rows.extend_from_slice(d.w_row(i));
            rows.push(hi);
        }
        Ok(Self {
            rows,
            n: d.n(),
            dim,
            augmented: true,
        })
    }

    /// Arbitrary row-major design with `dim` columns.
    pub fn from_rows(rows: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || !rows.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch(format!(
                "{} values do not form rows of width {dim}",
                rows.len()
            )));
        }
        Ok(Self {
            n: rows.len() / dim,
            rows,
            dim,
            augmented: false,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_augmented(&self) -> bool {
        self.augmented
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.rows.chunks_exact(self.dim)
    }

    fn check_coef(&self, vartheta: &[f64]) -> Result<()> {
        if vartheta.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for a design of width {}",
                vartheta.len(),
                self.dim
            )));
        }
        Ok(())
    }

    fn check_treatment(&self, a: &[u8]) -> Result<()> {
        if a.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "{} treatment values for {} design rows",
                a.len(),
                self.n
            )));
        }
        Ok(())
    }

    /// Equilibrated condition number of `RᵀR`.
    pub fn condition_number(&self) -> f64 {
        let mut rtr = DMatrix::<f64>::zeros(self.dim, self.dim);
        for r in self.rows() {
            for j in 0..self.dim {
                for k in 0..=j {
                    rtr[(j, k)] += r[j] * r[k];
                }
            }
        }
        for j in 0..self.dim {
            for k in 0..j {
                rtr[(k, j)] = rtr[(j, k)];
            }
        }
        equilibrated_condition(&rtr)
    }
}

/// Record of a grid discretization applied to fitted coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Discretization {
    pub k: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PropensityFit {
    /// Coefficients on the design columns; the last entry is the
    /// augmentation coefficient when the design is augmented.
    pub vartheta: Vec<f64>,
    pub converged: bool,
    pub n_iter: usize,
    /// Score max-norm at `vartheta` (before any discretization).
    pub grad_norm: f64,
    pub log_likelihood: f64,
    /// Log-likelihood after each accepted iterate, starting at zero coefficients.
    #[serde(skip)]
    pub loglik_trace: Vec<f64>,
    /// Clamped fitted scores on the fitting design.
    #[serde(skip)]
    pub scores: Vec<f64>,
    pub disc: Option<Discretization>,
}

impl PropensityFit {
    /// A fit with known coefficients, e.g. the true index in simulations.
    pub fn from_coefficients(design: &DesignSpec, vartheta: Vec<f64>) -> Result<Self> {
        design.check_coef(&vartheta)?;
        let scores = fitted_scores(design, &vartheta);
        Ok(Self {
            vartheta,
            converged: true,
            n_iter: 0,
            grad_norm: f64::NAN,
            log_likelihood: f64::NAN,
            loglik_trace: Vec::new(),
            scores,
            disc: None,
        })
    }

    /// Clamped score at a design row of matching width.
    pub fn predict(&self, r: &[f64]) -> f64 {
        clamp_score(expit(dot(&self.vartheta, r)))
    }

    /// Linear predictor `varthetaᵀ r`.
    pub fn index(&self, r: &[f64]) -> f64 {
        dot(&self.vartheta, r)
    }

    /// Replaces the coefficients by their grid-rounded version and refreshes
    /// the fitted scores.
    pub fn discretized(mut self, design: &DesignSpec, k: f64, n: usize) -> Result<Self> {
        self.vartheta = discretize(&self.vartheta, k, n)?;
        self.scores = fitted_scores(design, &self.vartheta);
        self.disc = Some(Discretization { k, n });
        Ok(self)
    }

    /// Augmentation coefficient, when present.
    pub fn gamma(&self, design: &DesignSpec) -> Option<f64> {
        design.is_augmented().then(|| *self.vartheta.last().unwrap())
    }
}

fn fitted_scores(design: &DesignSpec, vartheta: &[f64]) -> Vec<f64> {
    design.rows().map(|r| clamp_score(expit(dot(vartheta, r)))).collect()
}

pub fn log_likelihood(design: &DesignSpec, a: &[u8], vartheta: &[f64]) -> Result<f64> {
    design.check_coef(vartheta)?;
    design.check_treatment(a)?;
    Ok(loglik_unchecked(design, a, vartheta))
}

fn loglik_unchecked(design: &DesignSpec, a: &[u8], vartheta: &[f64]) -> f64 {
    design
        .rows()
        .zip(a)
        .map(|(r, &ai)| {
            let eta = dot(vartheta, r);
            f64::from(ai) * eta - softplus(eta)
        })
        .sum()
}

/// Score vector `Σ r(w_i) (a_i − π(w_i))` of the log-likelihood.
pub fn score(design: &DesignSpec, a: &[u8], vartheta: &[f64]) -> Result<Vec<f64>> {
    design.check_coef(vartheta)?;
    design.check_treatment(a)?;
    let mut u = vec![0.0; design.dim];
    for (r, &ai) in design.rows().zip(a) {
        let resid = f64::from(ai) - expit(dot(vartheta, r));
        for (uj, rj) in u.iter_mut().zip(r) {
            *uj += rj * resid;
        }
    }
    Ok(u)
}

/// Sample average of `π(1 − π) r rᵀ`.
pub fn fisher_info(design: &DesignSpec, vartheta: &[f64]) -> Result<DMatrix<f64>> {
    design.check_coef(vartheta)?;
    let mut info = weighted_cross(design, vartheta);
    info /= design.n as f64;
    Ok(info)
}

fn weighted_cross(design: &DesignSpec, vartheta: &[f64]) -> DMatrix<f64> {
    let k = design.dim;
    let mut m = DMatrix::<f64>::zeros(k, k);
    for r in design.rows() {
        let p = expit(dot(vartheta, r));
        let wt = p * (1.0 - p);
        for j in 0..k {
            let rj = wt * r[j];
            for l in 0..=j {
                m[(j, l)] += rj * r[l];
            }
        }
    }
    for j in 0..k {
        for l in 0..j {
            m[(l, j)] = m[(j, l)];
        }
    }
    m
}

/// Maximum-likelihood fit by Newton–Raphson with step halving, starting from
/// zero coefficients.
pub fn fit_mle(design: &DesignSpec, a: &[u8]) -> Result<PropensityFit> {
    design.check_treatment(a)?;
    for arm in [0u8, 1] {
        if !a.contains(&arm) {
            return Err(Error::ArmTooSmall { arm, have: 0, need: 1 });
        }
    }
    let cond = design.condition_number();
    if !(cond <= MAX_CONDITION) {
        return Err(Error::RankDeficient { cond });
    }

    let k = design.dim;
    let mut theta = vec![0.0; k];
    let mut ll = loglik_unchecked(design, a, &theta);
    let mut trace = vec![ll];

    for iter in 0..MAX_ITER {
        let grad = score(design, a, &theta)?;
        let gnorm = max_abs(&grad);
        let hess = weighted_cross(design, &theta);
        let step = match hess.cholesky() {
            Some(ch) => ch.solve(&DVector::from_vec(grad.clone())),
            None => {
                return Err(Error::Separation {
                    iter,
                    norm: max_abs(&theta),
                })
            }
        };
        let step_norm = step.amax();
        if gnorm <= GRAD_TOL && step_norm <= 1e-6 * (1.0 + max_abs(&theta)) {
            return Ok(finish(design, theta, iter, gnorm, ll, trace));
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand: Vec<f64> = theta.iter().zip(step.iter()).map(|(x, s)| x + t * s).collect();
            let ll_c = loglik_unchecked(design, a, &cand);
            // tolerate rounding-level decreases near the optimum
            if ll_c >= ll - 1e-12 * ll.abs().max(1.0) {
                accepted = Some((cand, ll_c));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((cand, ll_c)) => {
                let norm = max_abs(&cand);
                if norm > SEPARATION_BOUND {
                    return Err(Error::Separation { iter: iter + 1, norm });
                }
                let moved = cand != theta;
                theta = cand;
                ll = ll_c;
                trace.push(ll);
                if !moved && gnorm <= GRAD_FLOOR_TOL {
                    return Ok(finish(design, theta, iter + 1, gnorm, ll, trace));
                }
            }
            None if gnorm <= GRAD_FLOOR_TOL => {
                return Ok(finish(design, theta, iter, gnorm, ll, trace));
            }
            None => {
                return Err(Error::NotConverged {
                    iters: iter,
                    grad: gnorm,
                })
            }
        }
    }
    let grad = max_abs(&score(design, a, &theta)?);
    Err(Error::NotConverged { iters: MAX_ITER, grad })
}

fn finish(
    design: &DesignSpec,
    theta: Vec<f64>,
    n_iter: usize,
    grad_norm: f64,
    ll: f64,
    trace: Vec<f64>,
) -> PropensityFit {
    let scores = fitted_scores(design, &theta);
    PropensityFit {
        vartheta: theta,
        converged: true,
        n_iter,
        grad_norm,
        log_likelihood: ll,
        loglik_trace: trace,
        scores,
        disc: None,
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Rounds coefficients to the grid of spacing `1 / (k √n)`; exact halves
/// round away from zero.
pub fn discretize(vartheta: &[f64], k: f64, n: usize) -> Result<Vec<f64>> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "discretization constant must be positive, got {k}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("discretization needs n >= 1".into()));
    }
    let scale = k * (n as f64).sqrt();
    Ok(vartheta.iter().map(|t| (t * scale).round() / scale).collect())
}
