#![allow(clippy::needless_range_loop)]

use serde::{Deserialize, Serialize};

use super::EvalError;

/// Intercept first, then one weight per feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub ridge_lambda: f64,
}

impl LinearModel {
    pub fn feature_count(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.feature_count());
        self.weights[0] + self.weights[1..].iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }
}

/// Solves `A x = b` for symmetric positive definite `A` (row-major, n×n) by
/// Cholesky factorisation followed by one step of iterative refinement.
pub fn solve_spd(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>, EvalError> {
    let n = b.len();
    let scale = (0..n).map(|i| a[i][i].abs()).fold(0.0, f64::max);
    if scale == 0.0 || !scale.is_finite() {
        return Err(EvalError::SingularSystem);
    }
    let tol = scale * 1e-12;
    let mut l = vec![vec![0.0; n]; n];
    for j in 0..n {
        let mut d = a[j][j];
        for k in 0..j {
            d -= l[j][k] * l[j][k];
        }
        if d <= tol {
            return Err(EvalError::SingularSystem);
        }
        let d = d.sqrt();
        l[j][j] = d;
        for i in j + 1..n {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            l[i][j] = s / d;
        }
    }
    let substitute = |rhs: &[f64]| {
        let mut y = vec![0.0; n];
        for i in 0..n {
            let s: f64 = (0..i).map(|k| l[i][k] * y[k]).sum();
            y[i] = (rhs[i] - s) / l[i][i];
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| l[k][i] * x[k]).sum();
            x[i] = (y[i] - s) / l[i][i];
        }
        x
    };
    let mut x = substitute(b);
    let residual: Vec<f64> = (0..n)
        .map(|i| b[i] - (0..n).map(|j| a[i][j] * x[j]).sum::<f64>())
        .collect();
    let correction = substitute(&residual);
    for (xi, ci) in x.iter_mut().zip(correction) {
        *xi += ci;
    }
    Ok(x)
}

/// Ridge regression through the normal equations. The intercept is not penalised.
pub fn fit_linear(features: &[Vec<f64>], scores: &[f64], ridge_lambda: f64) -> Result<LinearModel, EvalError> {
    if !(ridge_lambda >= 0.0 && ridge_lambda.is_finite()) {
        return Err(EvalError::InvalidInput(format!("ridge lambda {ridge_lambda}")));
    }
    if features.len() != scores.len() {
        return Err(EvalError::LengthMismatch(features.len(), scores.len()));
    }
    let p = features.first().map_or(0, Vec::len);
    if features.iter().any(|r| r.len() != p) {
        return Err(EvalError::InvalidInput("ragged feature matrix".into()));
    }
    if features.len() < p + 1 {
        return Err(EvalError::InvalidInput(format!(
            "{} rows for {} unknowns",
            features.len(),
            p + 1
        )));
    }
    let dim = p + 1;
    let mut a = vec![vec![0.0; dim]; dim];
    let mut b = vec![0.0; dim];
    let mut row = vec![0.0; dim];
    for (x, y) in features.iter().zip(scores) {
        row[0] = 1.0;
        row[1..].copy_from_slice(x);
        for i in 0..dim {
            b[i] += row[i] * y;
            for j in 0..=i {
                a[i][j] += row[i] * row[j];
            }
        }
    }
    for i in 0..dim {
        for j in 0..i {
            a[j][i] = a[i][j];
        }
    }
    for (i, r) in a.iter_mut().enumerate().skip(1) {
        r[i] += ridge_lambda;
    }
    let weights = solve_spd(&a, &b)?;
    Ok(LinearModel { weights, ridge_lambda })
}
