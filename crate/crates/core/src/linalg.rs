//! Thin helpers over nalgebra shared by the regression code.

use nalgebra::{DMatrix, DVector};

/// Condition number of a symmetric PSD matrix after scaling it to unit
/// diagonal. Returns infinity when a diagonal entry is zero.
pub fn equilibrated_condition(m: &DMatrix<f64>) -> f64 {
    let k = m.nrows();
    let mut scale = Vec::with_capacity(k);
    for j in 0..k {
        let d = m[(j, j)];
        if !(d > 0.0) || !d.is_finite() {
            return f64::INFINITY;
        }
        scale.push(1.0 / d.sqrt());
    }
    let scaled = DMatrix::from_fn(k, k, |i, j| m[(i, j)] * scale[i] * scale[j]);
    let eig = scaled.symmetric_eigenvalues();
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves `m x = b` for symmetric positive definite `m`.
pub fn spd_solve(m: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let chol = m.clone().cholesky()?;
    Some(chol.solve(b))
}

/// Least squares `min ||X beta - y||^2 + ridge ||beta[1..]||^2` through the
/// normal equations; column 0 is taken to be the unpenalized intercept. `x` is row-major with `q` columns. Fails (returns `Err(cond)`)
/// when the equilibrated cross-product condition number exceeds `max_cond`.
pub fn least_squares(x: &[f64], q: usize, y: &[f64], ridge: f64, max_cond: f64) -> Result<Vec<f64>, f64> {
    let mut xtx = DMatrix::<f64>::zeros(q, q);
    let mut xty = DVector::<f64>::zeros(q);
    for (row, &yi) in x.chunks_exact(q).zip(y) {
        for j in 0..q {
            xty[j] += row[j] * yi;
            for k in 0..=j {
                xtx[(j, k)] += row[j] * row[k];
            }
        }
    }
    for j in 0..q {
        for k in 0..j {
            xtx[(k, j)] = xtx[(j, k)];
        }
    }
    let cond = equilibrated_condition(&xtx);
    if !(cond <= max_cond) {
        return Err(cond);
    }
    for j in 1..q {
        xtx[(j, j)] += ridge;
    }
    spd_solve(&xtx, &xty)
        .map(|b| b.iter().copied().collect())
        .ok_or(f64::INFINITY)
}
