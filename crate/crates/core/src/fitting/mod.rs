// Copyright 2026 The odmr-sim Authors
// SPDX-License-Identifier: Apache-2.0

//! Damped least squares and the measurement model library.

mod init;
mod models;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub use init::initial_guess;
pub use models::{model_eval, FitModel, ParamSpec, POSITIVE_FLOOR};

pub const MAX_ITERATIONS: usize = 200;
pub const RELATIVE_TOLERANCE: f64 = 1e-10;
/// Largest accepted condition number of the column-scaled normal matrix.
pub const MAX_CONDITION: f64 = 1e14;
/// Largest cosine between the residual and any Jacobian column at convergence.
pub const GRADIENT_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_sigma: Option<Vec<f64>>,
}

impl Dataset {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { x, y, y_sigma: None }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    fn validate(&self, model: &FitModel) -> Result<()> {
        if self.x.len() != self.y.len() {
            return Err(invalid("fitting", "data", format!("{} x values but {} y values", self.x.len(), self.y.len())));
        }
        let needed = model.n_params() + 1;
        if self.x.len() < needed {
            return Err(Error::TooFewPoints { model: model.id(), points: self.x.len(), needed });
        }
        if self.x.iter().chain(&self.y).any(|v| !v.is_finite()) {
            return Err(invalid("fitting", "data", "values must be finite"));
        }
        if let Some(s) = &self.y_sigma {
            if s.len() != self.y.len() {
                return Err(invalid("fitting", "y_sigma", "must have one entry per point"));
            }
            if s.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(invalid("fitting", "y_sigma", "entries must be finite and > 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: String,
    pub names: Vec<String>,
    pub params: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Euclidean norm of the (weighted) residual vector.
    pub residual_norm: f64,
    pub covariance: Vec<Vec<f64>>,
    pub converged: bool,
    pub n_iterations: usize,
    /// Residual norm after the start and after each accepted step.
    pub history: Vec<f64>,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.params[i])
    }

    pub fn error(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.std_errors[i])
    }
}

fn weights(data: &Dataset) -> Vec<f64> {
    match &data.y_sigma {
        Some(s) => s.iter().map(|v| 1.0 / v).collect(),
        None => vec![1.0; data.y.len()],
    }
}

fn residuals(model: &FitModel, p: &[f64], data: &Dataset, w: &[f64]) -> Result<DVector<f64>> {
    let f = model.eval_unchecked(p, &data.x)?;
    Ok(DVector::from_iterator(data.y.len(), (0..data.y.len()).map(|i| (data.y[i] - f[i]) * w[i])))
}

fn step_size(v: f64) -> f64 {
    (1e-6 * v.abs()).max(1e-6)
}

/// Central-difference Jacobian ∂model/∂p (rows: points, columns: params).
/// Falls back to a one-sided difference next to a bound.
pub fn jacobian_fd(model: &FitModel, params: &[f64], x: &[f64]) -> Result<DMatrix<f64>> {
    model.check_bounds(params)?;
    let specs = model.params();
    let mut jac = DMatrix::zeros(x.len(), params.len());
    for (j, spec) in specs.iter().enumerate() {
        let h = step_size(params[j]);
        let mut up = params.to_vec();
        let mut down = params.to_vec();
        up[j] = (params[j] + h).min(spec.hi);
        down[j] = (params[j] - h).max(spec.lo);
        let span = up[j] - down[j];
        if span <= 0.0 {
            return Err(invalid("fitting", "params", format!("parameter `{}` has no room for a difference step", spec.name)));
        }
        let fu = model.eval_unchecked(&up, x)?;
        let fd = model.eval_unchecked(&down, x)?;
        for i in 0..x.len() {
            jac[(i, j)] = (fu[i] - fd[i]) / span;
        }
    }
    Ok(jac)
}

fn project(model: &FitModel, p: &mut [f64]) {
    for (v, s) in p.iter_mut().zip(model.params()) {
        *v = v.clamp(s.lo, s.hi);
    }
}

/// Condition number of JᵀJ after scaling its columns to unit diagonal.
fn scaled_condition(jtj: &DMatrix<f64>) -> f64 {
    let n = jtj.nrows();
    let d: Vec<f64> = (0..n).map(|i| jtj[(i, i)].sqrt()).collect();
    if d.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return f64::INFINITY;
    }
    let scaled = DMatrix::from_fn(n, n, |i, j| jtj[(i, j)] / (d[i] * d[j]));
    let ev = scaled.symmetric_eigen().eigenvalues;
    let (lo, hi) = ev.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v.abs())));
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Largest cosine between the residual vector and a Jacobian column.
/// Residuals at rounding level relative to the data count as an exact fit.
fn gradient_cosine(jac: &DMatrix<f64>, r: &DVector<f64>, y_norm: f64) -> f64 {
    let rn = r.norm();
    if rn <= 1e-12 * y_norm {
        return 0.0;
    }
    (0..jac.ncols())
        .map(|j| {
            let col = jac.column(j);
            let cn = col.norm();
            if cn == 0.0 {
                0.0
            } else {
                col.dot(r).abs() / (cn * rn)
            }
        })
        .fold(0.0, f64::max)
}

/// Levenberg–Marquardt fit of `model` to `data` from `init`.
///
/// A step is accepted only if it lowers the residual; otherwise the damping
/// grows tenfold. Iteration stops when an accepted step changes the squared
/// residual by less than [`RELATIVE_TOLERANCE`] (relative), when no damping
/// yields a decrease, or after [`MAX_ITERATIONS`].
pub fn fit(model: &FitModel, data: &Dataset, init: &[f64]) -> Result<FitResult> {
    data.validate(model)?;
    model.check_bounds(init)?;
    let w = weights(data);
    let mut p = init.to_vec();
    let mut r = residuals(model, &p, data, &w)?;
    let mut cost = r.norm_squared();
    let mut history = vec![cost.sqrt()];
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut settled = false;

    let weighted_jacobian = |p: &[f64]| -> Result<DMatrix<f64>> {
        let mut j = jacobian_fd(model, p, &data.x)?;
        for (i, wi) in w.iter().enumerate() {
            j.row_mut(i).scale_mut(*wi);
        }
        Ok(j)
    };

    while iterations < MAX_ITERATIONS {
        if cost == 0.0 {
            settled = true;
            break;
        }
        iterations += 1;
        let jac = weighted_jacobian(&p)?;
        let jtj = jac.transpose() * &jac;
        let condition = scaled_condition(&jtj);
        if condition > MAX_CONDITION {
            return Err(Error::SingularNormalEquations { condition });
        }
        let g = jac.transpose() * &r;
        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for i in 0..a.nrows() {
                a[(i, i)] += lambda * jtj[(i, i)];
            }
            let Some(delta) = a.cholesky().map(|c| c.solve(&g)) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial: Vec<f64> = p.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            project(model, &mut trial);
            let rt = match residuals(model, &trial, data, &w) {
                Ok(rt) if rt.iter().all(|v| v.is_finite()) => rt,
                _ => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let trial_cost = rt.norm_squared();
            if trial_cost < cost {
                let change = (cost - trial_cost) / cost;
                p = trial;
                r = rt;
                cost = trial_cost;
                history.push(cost.sqrt());
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if change < RELATIVE_TOLERANCE {
                    settled = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted || settled {
            settled = true;
            break;
        }
    }

    let jac = weighted_jacobian(&p)?;
    let jtj = jac.transpose() * &jac;
    let y_norm = data.y.iter().zip(&w).map(|(y, w)| (y * w).powi(2)).sum::<f64>().sqrt();
    let converged = settled && gradient_cosine(&jac, &r, y_norm) <= GRADIENT_TOLERANCE;
    let n = data.len();
    let k = p.len();
    let s2 = if n > k { cost / (n - k) as f64 } else { 0.0 };
    let inverse = jtj.clone().try_inverse().ok_or(Error::SingularNormalEquations { condition: scaled_condition(&jtj) })?;
    let cov = inverse * s2;
    let covariance: Vec<Vec<f64>> = (0..k).map(|i| (0..k).map(|j| 0.5 * (cov[(i, j)] + cov[(j, i)])).collect()).collect();
    let std_errors = (0..k).map(|i| covariance[i][i].max(0.0).sqrt()).collect();
    Ok(FitResult {
        model: model.id().to_string(),
        names: model.params().iter().map(|s| s.name.to_string()).collect(),
        params: p,
        std_errors,
        residual_norm: cost.sqrt(),
        covariance,
        converged,
        n_iterations: iterations,
        history,
    })
}

/// Model curve at `x` plus seeded Gaussian noise of standard deviation `noise_sigma`.
pub fn synth(model: &FitModel, params: &[f64], x: &[f64], noise_sigma: f64, seed: u64) -> Result<Dataset> {
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(invalid("fitting", "noise_sigma", format!("must be >= 0, got {noise_sigma}")));
    }
    let mut y = model.eval(params, x)?;
    if noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise_sigma).expect("valid sigma");
        for v in &mut y {
            *v += normal.sample(&mut rng);
        }
    }
    Ok(Dataset::new(x.to_vec(), y))
}
