//! Closed-form variance quantities for the bivariate Gaussian design:
//! `W₁, W₂ ~ N(0, 1)` independent, `logit π(w) = θ₀ + θ₁w₁ + θ₂w₂`, linear
//! outcome means per arm and homoskedastic noise.
//!
//! The formulas assume `W₂` is a pure precision variable (`θ₂ = 0`) with no
//! effect modification (`γ₂ = β₂`). They are written for general `θ₀`
//! through `S = E[1/(π(1−π))] = 2 + 2cosh(θ₀)e^{θ₁²/2}`.

use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::logit::expit;

pub const GH_NODES: usize = 64;

/// Gauss–Hermite nodes and weights for `∫ e^{−x²} f(x) dx`, found by Newton
/// iteration on the orthonormal Hermite recurrence.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    const PIM4: f64 = 0.751_125_544_464_942_5;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let half = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0f64;
    for i in 0..half {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * (1.0 + z.abs()) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn gh64() -> &'static (Vec<f64>, Vec<f64>) {
    static NODES: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    NODES.get_or_init(|| gauss_hermite(GH_NODES))
}

/// `E[g(Z)]` for `Z ~ N(0, 1)` by Gauss–Hermite quadrature.
pub fn normal_expectation_with(nodes: &(Vec<f64>, Vec<f64>), g: impl Fn(f64) -> f64) -> f64 {
    let (x, w) = nodes;
    let s: f64 = x
        .iter()
        .zip(w)
        .map(|(&xi, &wi)| wi * g(std::f64::consts::SQRT_2 * xi))
        .sum();
    s / std::f64::consts::PI.sqrt()
}

pub fn normal_expectation(g: impl Fn(f64) -> f64) -> f64 {
    normal_expectation_with(gh64(), g)
}

/// `E[π(1−π)]` for `π = expit(θ₀ + θ₁Z)`, `Z ~ N(0, 1)`. The 64-node rule
/// is accurate to about 1e-12 for `|θ₁| ≤ 1` and 1e-6 at `|θ₁| = 3`; it
/// degrades beyond that as the integrand's poles approach the real axis.
pub fn e_pi_one_minus_pi(theta0: f64, theta1: f64) -> f64 {
    let f = |z: f64| {
        let p = expit(theta0 + theta1 * z);
        p * (1.0 - p)
    };
    if theta1 == 0.0 {
        f(0.0)
    } else {
        normal_expectation(f)
    }
}

/// `E[1/(π(1−π))]`.
pub fn e_inv_pi_one_minus_pi(theta0: f64, theta1: f64) -> f64 {
    2.0 + 2.0 * theta0.cosh() * (0.5 * theta1 * theta1).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticDesign {
    /// Propensity coefficients `(θ₀, θ₁, θ₂)`.
    pub theta: [f64; 3],
    /// Treated-arm outcome coefficients `(β₀, β₁, β₂)`.
    pub beta: [f64; 3],
    /// Control-arm outcome coefficients `(γ₀, γ₁, γ₂)`.
    pub gamma: [f64; 3],
    pub sigma: f64,
    pub m: usize,
}

impl AnalyticDesign {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if self.m == 0 {
            return Err(Error::InvalidArgument("number of matches must be >= 1".into()));
        }
        if self
            .theta
            .iter()
            .chain(&self.beta)
            .chain(&self.gamma)
            .any(|x| !x.is_finite())
        {
            return Err(Error::NonFinite("design coefficients".into()));
        }
        Ok(())
    }

    pub fn ate(&self) -> f64 {
        self.beta[0] - self.gamma[0]
    }

    /// `π(w)`.
    pub fn propensity(&self, w1: f64, w2: f64) -> f64 {
        expit(self.theta[0] + self.theta[1] * w1 + self.theta[2] * w2)
    }

    /// `μ(a, w)`.
    pub fn mu(&self, a: u8, w1: f64, w2: f64) -> f64 {
        let c = if a == 1 { &self.beta } else { &self.gamma };
        c[0] + c[1] * w1 + c[2] * w2
    }

    /// `μ̄(a, π(w))` as a function of the linear index `η = θ₀ + θ₁w₁ + θ₂w₂`.
    pub fn mu_bar_index(&self, a: u8, eta: f64) -> f64 {
        let c = if a == 1 { &self.beta } else { &self.gamma };
        let [t0, t1, t2] = self.theta;
        let ss = t1 * t1 + t2 * t2;
        if ss == 0.0 {
            return c[0];
        }
        c[0] + (c[1] * t1 + c[2] * t2) * (eta - t0) / ss
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticQuantities {
    pub sigma2_np: f64,
    pub gain_empty: f64,
    pub gain_h: f64,
    pub sigma2_m: f64,
    pub delta_m: f64,
    pub sigma2_star: f64,
    pub sigma2_opt: f64,
}

pub fn analytic_quantities(dz: &AnalyticDesign) -> Result<AnalyticQuantities> {
    dz.validate()?;
    if dz.theta[2] != 0.0 || dz.gamma[2] != dz.beta[2] {
        return Err(Error::InvalidArgument(
            "closed forms need theta2 = 0 and gamma2 = beta2".into(),
        ));
    }
    let [t0, t1, _] = dz.theta;
    let s = e_inv_pi_one_minus_pi(t0, t1);
    let b2sq = dz.beta[2] * dz.beta[2];
    let s2 = dz.sigma * dz.sigma;
    let sigma2_np = s2 * s + (dz.gamma[1] - dz.beta[1]).powi(2);
    let gain_h = b2sq * s;
    let gain_empty = if t1 == 0.0 {
        gain_h
    } else {
        b2sq / e_pi_one_minus_pi(t0, t1)
    };
    let delta_m = (s2 + b2sq) * (s - 1.0) / (2.0 * dz.m as f64);
    let sigma2_m = sigma2_np + gain_h + delta_m;
    Ok(AnalyticQuantities {
        sigma2_np,
        gain_empty,
        gain_h,
        sigma2_m,
        delta_m,
        sigma2_star: sigma2_m - gain_empty,
        sigma2_opt: sigma2_m - gain_h,
    })
}

/// Ratio of the unaugmented to the optimally augmented asymptotic variance,
/// in terms of the noise-standardized coefficients `β̄ = β/σ`, `γ̄ = γ/σ`.
pub fn relative_efficiency(
    theta1: f64,
    beta2bar: f64,
    beta1bar: f64,
    gamma1bar: f64,
    theta0: f64,
    m: usize,
) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidArgument("number of matches must be >= 1".into()));
    }
    if ![theta1, beta2bar, beta1bar, gamma1bar, theta0]
        .iter()
        .all(|x| x.is_finite())
    {
        return Err(Error::NonFinite("relative-efficiency parameters".into()));
    }
    let s = e_inv_pi_one_minus_pi(theta0, theta1);
    // with θ₁ = 0 the propensity is constant and 1/E[π(1−π)] equals S
    let inv_e = if theta1 == 0.0 {
        s
    } else {
        1.0 / e_pi_one_minus_pi(theta0, theta1)
    };
    let b2sq = beta2bar * beta2bar;
    let num = b2sq * (s - inv_e);
    let den = s + (gamma1bar - beta1bar).powi(2) + (1.0 + b2sq) * (s - 1.0) / (2.0 * m as f64);
    Ok(1.0 + num / den)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_rule_integrates_moments() {
        assert!((normal_expectation(|_| 1.0) - 1.0).abs() < 1e-13);
        assert!((normal_expectation(|z| z * z) - 1.0).abs() < 1e-12);
        assert!((normal_expectation(|z| z.powi(4)) - 3.0).abs() < 1e-11);
        assert!((normal_expectation(|z| z.powi(3))).abs() < 1e-12);
        assert!((normal_expectation(|z| (0.7 * z).exp()) - (0.245f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn e_pi_values() {
        assert_eq!(e_pi_one_minus_pi(0.0, 0.0), 0.25);
        let v = e_pi_one_minus_pi(0.4, 1.3);
        assert_eq!(v, e_pi_one_minus_pi(0.4, -1.3));
        assert!((v - e_pi_one_minus_pi(-0.4, 1.3)).abs() < 1e-15);
        let (x, w) = gauss_hermite(128);
        let g128 = normal_expectation_with(&(x, w), |z| {
            let p = expit(0.4 + 1.3 * z);
            p * (1.0 - p)
        });
        assert!((v - g128).abs() < 1e-12);
    }

    #[test]
    fn closed_form_example() {
        let dz = AnalyticDesign {
            theta: [0.0, 1.0, 0.0],
            beta: [1.0, 1.0, 1.0],
            gamma: [0.0, 1.0, 1.0],
            sigma: 1.0,
            m: 1,
        };
        let q = analytic_quantities(&dz).unwrap();
        let e = 0.5f64.exp();
        assert!((q.sigma2_np - 2.0 * (1.0 + e)).abs() < 1e-12);
        assert!((q.sigma2_np - 5.2974).abs() < 1e-4);
        assert!((q.gain_h - 2.0 * (1.0 + e)).abs() < 1e-12);
        assert!((q.delta_m - (1.0 + 2.0 * e)).abs() < 1e-12);
        assert!((q.sigma2_opt - q.sigma2_np - q.delta_m).abs() < 1e-12);
        assert!(q.gain_empty <= q.gain_h);
    }

    #[test]
    fn no_precision_variable_means_no_gain() {
        let dz = AnalyticDesign {
            theta: [0.3, 1.5, 0.0],
            beta: [1.0, 2.0, 0.0],
            gamma: [0.0, 1.0, 0.0],
            sigma: 2.0,
            m: 3,
        };
        let q = analytic_quantities(&dz).unwrap();
        assert_eq!(q.gain_empty, 0.0);
        assert_eq!(q.gain_h, 0.0);
        assert_eq!(q.sigma2_star, q.sigma2_m);
        assert_eq!(q.sigma2_opt, q.sigma2_m);
    }

    #[test]
    fn preconditions() {
        let mut dz = AnalyticDesign {
            theta: [0.0, 1.0, 0.5],
            beta: [1.0, 1.0, 1.0],
            gamma: [0.0, 1.0, 1.0],
            sigma: 1.0,
            m: 1,
        };
        assert!(analytic_quantities(&dz).is_err());
        dz.theta[2] = 0.0;
        dz.gamma[2] = 2.0;
        assert!(analytic_quantities(&dz).is_err());
        dz.gamma[2] = 1.0;
        dz.sigma = 0.0;
        assert!(analytic_quantities(&dz).is_err());
    }

    #[test]
    fn relative_efficiency_edges() {
        assert_eq!(relative_efficiency(0.0, 1.0, 1.0, 1.0, 0.0, 1).unwrap(), 1.0);
        assert_eq!(relative_efficiency(0.0, 1.0, 1.0, 1.0, 0.7, 2).unwrap(), 1.0);
        assert_eq!(relative_efficiency(1.4, 0.0, 1.0, -1.0, 0.0, 1).unwrap(), 1.0);
        let r1 = relative_efficiency(1.0, 1.0, 1.0, 1.0, 0.0, 1).unwrap();
        let r4 = relative_efficiency(1.0, 1.0, 1.0, 1.0, 0.0, 4).unwrap();
        assert!(r4 > r1 && r1 > 1.0);
        assert!(relative_efficiency(1.0, 1.0, 1.0, 1.0, 0.0, 0).is_err());
    }

    #[test]
    fn relative_efficiency_matches_quantities() {
        let dz = AnalyticDesign {
            theta: [0.2, 1.1, 0.0],
            beta: [0.0, 0.6, 1.4],
            gamma: [0.0, -0.3, 1.4],
            sigma: 2.0,
            m: 2,
        };
        let q = analytic_quantities(&dz).unwrap();
        let re = relative_efficiency(1.1, 0.7, 0.3, -0.15, 0.2, 2).unwrap();
        assert!((re - q.sigma2_star / q.sigma2_opt).abs() < 1e-12);
    }
}
