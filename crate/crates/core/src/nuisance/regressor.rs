//! Small regression toolkit used for the outcome regressions and their
//! propensity-reduced versions: ordinary least squares, additive polynomial
//! ridge, k-nearest-neighbour averaging and Gaussian-kernel local-linear
//! smoothing, plus cross-validated selection among candidates.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::least_squares;

pub const POLY_RIDGE: f64 = 1e-8;
const MAX_CONDITION: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegressorKind {
    /// Ordinary least squares with intercept.
    Linear,
    /// Additive polynomial in each standardized feature, ridge-stabilized,
    /// with inputs clamped to the training range at prediction time.
    Polynomial { degree: usize },
    /// Mean of the k nearest training responses; `None` picks
    /// `⌈n^0.7⌉` capped at `n / 4`.
    Knn { k: Option<usize> },
    /// Gaussian-kernel local-linear fit; bandwidth in standardized units.
    LocalLinear { bandwidth: f64 },
}

/// Candidate kinds and the number of cross-validation folds used to choose
/// among them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressorSpec {
    pub candidates: Vec<RegressorKind>,
    pub folds: usize,
}

impl RegressorSpec {
    pub fn single(kind: RegressorKind) -> Self {
        Self {
            candidates: vec![kind],
            folds: 5,
        }
    }

    /// Linear and cubic candidates, 5-fold CV.
    pub fn outcome_default() -> Self {
        Self {
            candidates: vec![RegressorKind::Linear, RegressorKind::Polynomial { degree: 3 }],
            folds: 5,
        }
    }

    /// Cubic polynomial in the scalar propensity feature.
    pub fn reduced_default() -> Self {
        Self::single(RegressorKind::Polynomial { degree: 3 })
    }
}

/// Row-major feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    data: Vec<f64>,
    dim: usize,
}

impl Features {
    pub fn new(data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch(format!(
                "{} values do not form rows of width {dim}",
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("regression features".into()));
        }
        Ok(Self { data, dim })
    }

    pub fn scalar(x: Vec<f64>) -> Result<Self> {
        Self::new(x, 1)
    }

    pub fn n(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    fn select(&self, idx: &[usize]) -> Features {
        let data = idx.iter().flat_map(|&i| self.row(i).to_vec()).collect();
        Features { data, dim: self.dim }
    }

    fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.data.iter().skip(j).step_by(self.dim).copied()
    }
}

/// Per-feature centring and scaling.
#[derive(Debug, Clone)]
struct Standardizer {
    center: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    fn fit(x: &Features) -> Self {
        let n = x.n() as f64;
        let mut center = Vec::with_capacity(x.dim);
        let mut scale = Vec::with_capacity(x.dim);
        for j in 0..x.dim {
            let mean = x.column(j).sum::<f64>() / n;
            let var = x.column(j).map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            center.push(mean);
            scale.push(if var > 0.0 { var.sqrt() } else { 1.0 });
        }
        Self { center, scale }
    }

    fn apply(&self, row: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            row.iter()
                .zip(&self.center)
                .zip(&self.scale)
                .map(|((x, c), s)| (x - c) / s),
        );
    }

    fn transform(&self, x: &Features) -> Features {
        let mut data = Vec::with_capacity(x.data.len());
        let mut buf = Vec::with_capacity(x.dim);
        for i in 0..x.n() {
            self.apply(x.row(i), &mut buf);
            data.extend_from_slice(&buf);
        }
        Features { data, dim: x.dim }
    }
}

#[derive(Debug, Clone)]
pub struct PolyFit {
    kind: RegressorKind,
    /// Highest power used for each feature (0 drops the feature).
    powers: Vec<usize>,
    std: Option<Standardizer>,
    /// Training range per feature; inputs are clamped into it.
    range: Option<Vec<(f64, f64)>>,
    coef: Vec<f64>,
    ridge: f64,
}

impl PolyFit {
    fn fit(kind: RegressorKind, x: &Features, y: &[f64]) -> Result<Self> {
        let (degree, linear) = match kind {
            RegressorKind::Linear => (1, true),
            RegressorKind::Polynomial { degree } => (degree.max(1), false),
            _ => unreachable!(),
        };
        let powers: Vec<usize> = (0..x.dim)
            .map(|j| {
                if linear {
                    1
                } else {
                    degree.min(distinct_upto(x.column(j), degree + 1).saturating_sub(1))
                }
            })
            .collect();
        let (std, range) = if linear {
            (None, None)
        } else {
            let range = (0..x.dim)
                .map(|j| {
                    x.column(j)
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
                })
                .collect();
            (Some(Standardizer::fit(x)), Some(range))
        };
        let ridge = if linear { 0.0 } else { POLY_RIDGE };
        let mut fit = PolyFit {
            kind,
            powers,
            std,
            range,
            coef: Vec::new(),
            ridge,
        };
        let q = fit.n_terms();
        if x.n() <= q {
            return Err(Error::Degenerate(format!(
                "{} points cannot support {q} regression terms",
                x.n()
            )));
        }
        let mut basis = Vec::with_capacity(x.n() * q);
        for i in 0..x.n() {
            fit.basis(x.row(i), &mut basis);
        }
        fit.coef = least_squares(&basis, q, y, ridge, MAX_CONDITION).map_err(|cond| Error::RankDeficient { cond })?;
        Ok(fit)
    }

    fn n_terms(&self) -> usize {
        1 + self.powers.iter().sum::<usize>()
    }

    fn basis(&self, row: &[f64], out: &mut Vec<f64>) {
        out.push(1.0);
        for (j, &pw) in self.powers.iter().enumerate() {
            let mut x = row[j];
            if let Some(range) = &self.range {
                x = x.clamp(range[j].0, range[j].1);
            }
            if let Some(std) = &self.std {
                x = (x - std.center[j]) / std.scale[j];
            }
            let mut t = 1.0;
            for _ in 0..pw {
                t *= x;
                out.push(t);
            }
        }
    }

    fn predict(&self, row: &[f64]) -> f64 {
        let mut b = Vec::with_capacity(self.coef.len());
        self.basis(row, &mut b);
        b.iter().zip(&self.coef).map(|(x, c)| x * c).sum()
    }

    /// Coefficients of the fitted basis; for the linear kind these are the
    /// intercept followed by one slope per feature on the original scale.
    pub fn coefficients(&self) -> &[f64] {
        &self.coef
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }
}

fn distinct_upto(values: impl Iterator<Item = f64>, cap: usize) -> usize {
    let mut seen: Vec<f64> = Vec::with_capacity(cap);
    for v in values {
        if !seen.contains(&v) {
            seen.push(v);
            if seen.len() >= cap {
                break;
            }
        }
    }
    seen.len()
}

#[derive(Debug, Clone)]
pub struct KnnFit {
    k: usize,
    std: Standardizer,
    x: Features,
    y: Vec<f64>,
    /// For one-dimensional inputs: training order by feature value.
    sorted: Option<Vec<usize>>,
}

impl KnnFit {
    fn fit(k: Option<usize>, x: &Features, y: &[f64]) -> Result<Self> {
        let n = x.n();
        let k = match k {
            Some(k) => k,
            None => ((n as f64).powf(0.7).ceil() as usize).min(n / 4),
        }
        .clamp(1, n);
        let std = Standardizer::fit(x);
        let xs = std.transform(x);
        let sorted = (x.dim == 1).then(|| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&i, &j| xs.data[i].total_cmp(&xs.data[j]).then(i.cmp(&j)));
            idx
        });
        Ok(Self {
            k,
            std,
            x: xs,
            y: y.to_vec(),
            sorted,
        })
    }

    fn predict(&self, row: &[f64]) -> f64 {
        let mut q = Vec::with_capacity(row.len());
        self.std.apply(row, &mut q);
        let total: f64 = match &self.sorted {
            Some(order) => self.nearest_1d(order, q[0]).map(|i| self.y[i]).sum(),
            None => {
                let mut cand: Vec<(f64, usize)> = (0..self.x.n())
                    .map(|i| {
                        let d: f64 = self.x.row(i).iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum();
                        (d, i)
                    })
                    .collect();
                let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
                if self.k < cand.len() {
                    cand.select_nth_unstable_by(self.k - 1, cmp);
                }
                cand[..self.k].iter().map(|&(_, i)| self.y[i]).sum()
            }
        };
        total / self.k as f64
    }

    /// Indices of the k nearest training points to `q` along the sorted axis.
    fn nearest_1d<'a>(&'a self, order: &'a [usize], q: f64) -> impl Iterator<Item = usize> + 'a {
        let val = |r: usize| self.x.data[order[r]];
        let pos = order.partition_point(|&i| self.x.data[i] < q);
        let (mut lo, mut hi) = (pos, pos);
        let mut out = Vec::with_capacity(self.k);
        while out.len() < self.k {
            let take_left = match (lo > 0, hi < order.len()) {
                (true, true) => {
                    let dl = q - val(lo - 1);
                    let dr = val(hi) - q;
                    dl < dr || (dl == dr && order[lo - 1] < order[hi])
                }
                (true, false) => true,
                (false, true) => false,
                (false, false) => break,
            };
            if take_left {
                lo -= 1;
                out.push(order[lo]);
            } else {
                out.push(order[hi]);
                hi += 1;
            }
        }
        out.into_iter()
    }
}

#[derive(Debug, Clone)]
pub struct LocalLinearFit {
    bandwidth: f64,
    std: Standardizer,
    x: Features,
    y: Vec<f64>,
}

impl LocalLinearFit {
    fn fit(bandwidth: f64, x: &Features, y: &[f64]) -> Result<Self> {
        if !(bandwidth > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "local-linear bandwidth must be positive, got {bandwidth}"
            )));
        }
        let std = Standardizer::fit(x);
        Ok(Self {
            bandwidth,
            x: std.transform(x),
            std,
            y: y.to_vec(),
        })
    }

    fn predict(&self, row: &[f64]) -> f64 {
        let mut q = Vec::with_capacity(row.len());
        self.std.apply(row, &mut q);
        let dim = self.x.dim;
        let k = dim + 1;
        let mut xtwx = nalgebra::DMatrix::<f64>::zeros(k, k);
        let mut xtwy = nalgebra::DVector::<f64>::zeros(k);
        let mut wsum = 0.0;
        let mut wy = 0.0;
        let mut best = (f64::INFINITY, 0usize);
        let mut z = vec![0.0; k];
        z[0] = 1.0;
        for i in 0..self.x.n() {
            let r = self.x.row(i);
            let mut d2 = 0.0;
            for j in 0..dim {
                z[j + 1] = r[j] - q[j];
                d2 += z[j + 1] * z[j + 1];
            }
            if d2 < best.0 {
                best = (d2, i);
            }
            let w = (-0.5 * d2 / (self.bandwidth * self.bandwidth)).exp();
            if w == 0.0 {
                continue;
            }
            wsum += w;
            wy += w * self.y[i];
            for a in 0..k {
                xtwy[a] += w * z[a] * self.y[i];
                for b in 0..=a {
                    xtwx[(a, b)] += w * z[a] * z[b];
                }
            }
        }
        if wsum < 1e-300 {
            return self.y[best.1];
        }
        for a in 0..k {
            for b in 0..a {
                xtwx[(b, a)] = xtwx[(a, b)];
            }
        }
        if crate::linalg::equilibrated_condition(&xtwx) < 1e10 {
            if let Some(beta) = crate::linalg::spd_solve(&xtwx, &xtwy) {
                return beta[0];
            }
        }
        wy / wsum
    }
}

/// A known regression function, e.g. the true conditional mean in a
/// simulation.
#[derive(Clone)]
pub struct OracleFn(pub RowFn);

pub type RowFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

impl fmt::Debug for OracleFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("OracleFn")
    }
}

#[derive(Debug, Clone)]
pub enum Regressor {
    Polynomial(PolyFit),
    Knn(KnnFit),
    LocalLinear(LocalLinearFit),
    Oracle(OracleFn),
}

impl Regressor {
    pub fn oracle(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Regressor::Oracle(OracleFn(Arc::new(f)))
    }

    pub fn fit(kind: RegressorKind, x: &Features, y: &[f64]) -> Result<Self> {
        if x.n() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} feature rows for {} responses",
                x.n(),
                y.len()
            )));
        }
        if x.n() == 0 {
            return Err(Error::Degenerate("no training points".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("regression responses".into()));
        }
        Ok(match kind {
            RegressorKind::Linear | RegressorKind::Polynomial { .. } => {
                Regressor::Polynomial(PolyFit::fit(kind, x, y)?)
            }
            RegressorKind::Knn { k } => Regressor::Knn(KnnFit::fit(k, x, y)?),
            RegressorKind::LocalLinear { bandwidth } => Regressor::LocalLinear(LocalLinearFit::fit(bandwidth, x, y)?),
        })
    }

    /// Fits the candidate with the lowest cross-validated squared error,
    /// refitted on all points. Folds are assigned by the rank of the
    /// response, so the choice does not depend on row order.
    pub fn fit_spec(spec: &RegressorSpec, x: &Features, y: &[f64]) -> Result<Self> {
        match spec.candidates.as_slice() {
            [] => Err(Error::InvalidArgument("regressor spec has no candidates".into())),
            [only] => Self::fit(*only, x, y),
            cands => {
                let n = y.len();
                let folds = spec.folds.max(2);
                if n < 2 * folds {
                    return cands
                        .iter()
                        .find_map(|&k| Self::fit(k, x, y).ok())
                        .ok_or_else(|| Error::Degenerate("no candidate regressor fits".into()));
                }
                let fold_of = rank_folds(y, folds);
                let mut best: Option<(f64, RegressorKind)> = None;
                for &kind in cands {
                    let mse = cv_mse(kind, x, y, &fold_of, folds);
                    if mse.is_finite() && best.is_none_or(|(b, _)| mse < b) {
                        best = Some((mse, kind));
                    }
                }
                match best {
                    Some((_, kind)) => Self::fit(kind, x, y),
                    None => Self::fit(cands[0], x, y),
                }
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        match self {
            Regressor::Polynomial(f) => f.predict(row),
            Regressor::Knn(f) => f.predict(row),
            Regressor::LocalLinear(f) => f.predict(row),
            Regressor::Oracle(f) => (f.0)(row),
        }
    }

    pub fn kind(&self) -> Option<RegressorKind> {
        match self {
            Regressor::Polynomial(f) => Some(f.kind),
            Regressor::Knn(f) => Some(RegressorKind::Knn { k: Some(f.k) }),
            Regressor::LocalLinear(f) => Some(RegressorKind::LocalLinear { bandwidth: f.bandwidth }),
            Regressor::Oracle(_) => None,
        }
    }

    /// Least-squares coefficients for the linear and polynomial kinds.
    pub fn coefficients(&self) -> Option<&[f64]> {
        match self {
            Regressor::Polynomial(f) => Some(f.coefficients()),
            _ => None,
        }
    }
}

fn rank_folds(y: &[f64], folds: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&i, &j| y[i].total_cmp(&y[j]).then(i.cmp(&j)));
    let mut fold_of = vec![0; y.len()];
    for (r, &i) in order.iter().enumerate() {
        fold_of[i] = r % folds;
    }
    fold_of
}

fn cv_mse(kind: RegressorKind, x: &Features, y: &[f64], fold_of: &[usize], folds: usize) -> f64 {
    let mut sse = 0.0;
    for f in 0..folds {
        let (test, train): (Vec<usize>, Vec<usize>) = (0..y.len()).partition(|&i| fold_of[i] == f);
        let ytr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let model = match Regressor::fit(kind, &x.select(&train), &ytr) {
            Ok(m) => m,
            Err(_) => return f64::INFINITY,
        };
        sse += test
            .iter()
            .map(|&i| (model.predict(x.row(i)) - y[i]).powi(2))
            .sum::<f64>();
    }
    sse / y.len() as f64
}
