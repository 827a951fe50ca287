//! Weighted, l2-regularized logistic regression.
//!
//! Minimizes `sum_i w_i * (softplus(z_i) - y_i * z_i) + l2/2 * |beta|^2`
//! with `z_i = beta . x_i + b`. The intercept is not penalized. The solver
//! is Newton's method with an Armijo backtracking line search.

use serde::{Deserialize, Serialize};

use super::{sigmoid, LearnerError};
use crate::matrix::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    pub max_iterations: usize,
    /// Penalty on the summed (not averaged) loss, so `1.0` matches an
    /// inverse regularization strength `C = 1`.
    pub l2_strength: f64,
    /// Stop once the max-norm of the gradient falls below this.
    pub tolerance: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            l2_strength: 1.0,
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub feature_names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub config: LogisticConfig,
    pub iterations: usize,
    pub converged: bool,
}

/// Lowest and highest probability a linear model will report.
pub(crate) const PROBABILITY_FLOOR: f64 = 1e-15;

impl LinearModel {
    pub fn margin(&self, row: &[f64]) -> f64 {
        self.intercept + dot(&self.coefficients, row)
    }

    /// Probability strictly inside (0, 1).
    pub fn probability(&self, row: &[f64]) -> f64 {
        sigmoid(self.margin(row)).clamp(PROBABILITY_FLOOR, 1.0 - PROBABILITY_FLOOR)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `log(1 + exp(z))` without overflow.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// The training objective over a fixed data set. Parameters are laid out as
/// `[coefficients..., intercept]`.
pub struct LogisticObjective<'a> {
    matrix: &'a FeatureMatrix,
    labels: &'a [bool],
    weights: &'a [f64],
    l2: f64,
}

impl<'a> LogisticObjective<'a> {
    pub fn new(matrix: &'a FeatureMatrix, labels: &'a [bool], weights: &'a [f64], l2: f64) -> Self {
        assert_eq!(matrix.n_rows(), labels.len());
        assert_eq!(matrix.n_rows(), weights.len());
        Self {
            matrix,
            labels,
            weights,
            l2,
        }
    }

    pub fn n_params(&self) -> usize {
        self.matrix.n_cols() + 1
    }

    fn margin(&self, theta: &[f64], i: usize) -> f64 {
        let p = self.matrix.n_cols();
        theta[p] + dot(&theta[..p], self.matrix.row(i))
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        let p = self.matrix.n_cols();
        let data: f64 = (0..self.matrix.n_rows())
            .map(|i| {
                let z = self.margin(theta, i);
                let y = if self.labels[i] { 1.0 } else { 0.0 };
                self.weights[i] * (softplus(z) - y * z)
            })
            .sum();
        data + 0.5 * self.l2 * theta[..p].iter().map(|b| b * b).sum::<f64>()
    }

    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let p = self.matrix.n_cols();
        let mut g = vec![0.0; p + 1];
        for i in 0..self.matrix.n_rows() {
            let y = if self.labels[i] { 1.0 } else { 0.0 };
            let r = self.weights[i] * (sigmoid(self.margin(theta, i)) - y);
            for (gj, xj) in g.iter_mut().zip(self.matrix.row(i)) {
                *gj += r * xj;
            }
            g[p] += r;
        }
        for j in 0..p {
            g[j] += self.l2 * theta[j];
        }
        g
    }

    /// Dense Hessian, row-major `(p+1) x (p+1)`.
    pub fn hessian(&self, theta: &[f64]) -> Vec<f64> {
        let p = self.matrix.n_cols();
        let d = p + 1;
        let mut h = vec![0.0; d * d];
        let mut x = vec![1.0; d];
        for i in 0..self.matrix.n_rows() {
            let s = sigmoid(self.margin(theta, i));
            let c = self.weights[i] * s * (1.0 - s);
            if c == 0.0 {
                continue;
            }
            x[..p].copy_from_slice(self.matrix.row(i));
            for a in 0..d {
                let ca = c * x[a];
                for b in a..d {
                    h[a * d + b] += ca * x[b];
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                h[a * d + b] = h[b * d + a];
            }
        }
        for j in 0..p {
            h[j * d + j] += self.l2;
        }
        h
    }
}

/// In-place Cholesky solve of `a x = b`. Returns `None` if `a` is not
/// positive definite.
fn cholesky_solve(mut a: Vec<f64>, b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    for j in 0..n {
        let mut diag = a[j * n + j];
        for k in 0..j {
            diag -= a[j * n + k] * a[j * n + k];
        }
        if !(diag > 0.0) {
            return None;
        }
        let diag = diag.sqrt();
        a[j * n + j] = diag;
        for i in j + 1..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = v / diag;
        }
    }
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= a[i * n + k] * y[k];
        }
        y[i] /= a[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= a[k * n + i] * y[k];
        }
        y[i] /= a[i * n + i];
    }
    Some(y)
}

fn newton_direction(hessian: Vec<f64>, gradient: &[f64]) -> Vec<f64> {
    let n = gradient.len();
    let neg: Vec<f64> = gradient.iter().map(|g| -g).collect();
    let scale = (0..n).map(|i| hessian[i * n + i].abs()).fold(0.0, f64::max).max(1.0);
    let mut ridge = 0.0;
    loop {
        let mut h = hessian.clone();
        for i in 0..n {
            h[i * n + i] += ridge;
        }
        if let Some(d) = cholesky_solve(h, &neg) {
            return d;
        }
        ridge = if ridge == 0.0 { 1e-10 * scale } else { ridge * 10.0 };
        if ridge > 1e6 * scale {
            // Hessian hopeless; fall back to steepest descent.
            return neg;
        }
    }
}

pub(crate) fn fit_logistic(
    matrix: &FeatureMatrix,
    labels: &[bool],
    weights: &[f64],
    config: &LogisticConfig,
) -> Result<LinearModel, LearnerError> {
    if matrix.n_rows() == 0 {
        return Err(LearnerError::EmptyPool);
    }
    let objective = LogisticObjective::new(matrix, labels, weights, config.l2_strength);
    let p = matrix.n_cols();
    let mut theta = vec![0.0; p + 1];
    let mut value = objective.value(&theta);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iterations {
        let grad = objective.gradient(&theta);
        if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(LearnerError::NonFinite("logistic loss or gradient"));
        }
        if grad.iter().fold(0.0f64, |m, g| m.max(g.abs())) < config.tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let mut dir = newton_direction(objective.hessian(&theta), &grad);
        let mut slope: f64 = dot(&grad, &dir);
        if !(slope < 0.0) {
            dir = grad.iter().map(|g| -g).collect();
            slope = dot(&grad, &dir);
        }
        // Near the optimum the decrease falls below the resolution of the
        // summed loss; a change within a few ulps still counts as sufficient.
        let slack = 8.0 * f64::EPSILON * value.abs();
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t + step * d).collect();
            if trial == theta {
                break;
            }
            let trial_value = objective.value(&trial);
            if trial_value <= value + 1e-4 * step * slope + slack {
                theta = trial;
                value = trial_value;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // No representable decrease left along the search direction.
            let grad = objective.gradient(&theta);
            converged = grad.iter().fold(0.0f64, |m, g| m.max(g.abs())) < config.tolerance;
            break;
        }
    }
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(LearnerError::NonFinite("logistic coefficients"));
    }
    Ok(LinearModel {
        feature_names: matrix.column_names().to_vec(),
        intercept: theta[p],
        coefficients: theta[..p].to_vec(),
        config: *config,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softplus_is_stable() {
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0 && softplus(-1000.0) < 1e-300);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn cholesky_solves_spd() {
        let a = vec![4.0, 2.0, 2.0, 3.0];
        let x = cholesky_solve(a, &[2.0, 1.0]).unwrap();
        assert!((4.0 * x[0] + 2.0 * x[1] - 2.0).abs() < 1e-12);
        assert!((2.0 * x[0] + 3.0 * x[1] - 1.0).abs() < 1e-12);
        assert!(cholesky_solve(vec![1.0, 2.0, 2.0, 1.0], &[1.0, 1.0]).is_none());
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let m = FeatureMatrix::from_rows(
            (0..4).map(|i| i.to_string()).collect(),
            vec!["a".into(), "b".into()],
            &[vec![0.5, 1.0], vec![-1.0, 2.0], vec![2.0, 0.0], vec![0.1, -0.3]],
        )
        .unwrap();
        let labels = [true, false, true, false];
        let weights = [1.0, 2.0, 0.5, 1.5];
        let obj = LogisticObjective::new(&m, &labels, &weights, 0.7);
        let theta = [0.3, -0.2, 0.1];
        let h = obj.hessian(&theta);
        let eps = 1e-6;
        for j in 0..3 {
            let mut up = theta;
            let mut down = theta;
            up[j] += eps;
            down[j] -= eps;
            let (gu, gd) = (obj.gradient(&up), obj.gradient(&down));
            for i in 0..3 {
                let fd = (gu[i] - gd[i]) / (2.0 * eps);
                assert!((fd - h[i * 3 + j]).abs() < 1e-6, "H[{i},{j}]");
            }
        }
    }
}
