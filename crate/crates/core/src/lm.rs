//! Box-bounded Levenberg-Marquardt least squares.
//!
//! Small dense problems only: the Jacobian is formed by central differences
//! and the damped normal equations are solved directly. Bounds are enforced by
//! projecting each trial point onto the box.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub trait Residuals {
    fn n_residuals(&self) -> usize;
    fn residuals(&self, params: &[f64], out: &mut [f64]);
}

#[derive(Debug, Clone)]
pub struct LmConfig {
    pub max_iter: usize,
    /// Relative cost reduction below which the fit is converged.
    pub ftol: f64,
    /// Relative step size below which the fit is converged.
    pub xtol: f64,
    /// Scaled gradient norm below which the fit is converged.
    pub gtol: f64,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    /// Central-difference step, absolute.
    pub fd_step: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            max_iter: 300,
            ftol: 1e-14,
            xtol: 1e-12,
            gtol: 1e-12,
            lower: None,
            upper: None,
            fd_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub params: Vec<f64>,
    /// `0.5 * |r|^2`
    pub cost: f64,
    pub residuals: Vec<f64>,
    pub jacobian: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn project(x: &mut [f64], cfg: &LmConfig) {
    if let Some(lo) = &cfg.lower {
        for (v, l) in x.iter_mut().zip(lo) {
            *v = v.max(*l);
        }
    }
    if let Some(hi) = &cfg.upper {
        for (v, h) in x.iter_mut().zip(hi) {
            *v = v.min(*h);
        }
    }
}

fn cost_of(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|v| v * v).sum::<f64>()
}

pub fn jacobian<P: Residuals + ?Sized>(problem: &P, x: &[f64], step: f64) -> DMatrix<f64> {
    let m = problem.n_residuals();
    let n = x.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut xp = x.to_vec();
    let mut rp = vec![0.0; m];
    let mut rm = vec![0.0; m];
    for j in 0..n {
        let h = step * x[j].abs().max(1.0);
        xp[j] = x[j] + h;
        problem.residuals(&xp, &mut rp);
        xp[j] = x[j] - h;
        problem.residuals(&xp, &mut rm);
        xp[j] = x[j];
        for i in 0..m {
            jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * h);
        }
    }
    jac
}

pub fn minimize<P: Residuals + ?Sized>(problem: &P, x0: &[f64], cfg: &LmConfig) -> Result<LmReport> {
    let m = problem.n_residuals();
    let n = x0.len();
    if m < n {
        return Err(Error::validation(format!(
            "{m} residuals cannot determine {n} parameters"
        )));
    }
    let mut x = x0.to_vec();
    project(&mut x, cfg);
    let mut r = vec![0.0; m];
    problem.residuals(&x, &mut r);
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("non-finite residuals at the starting point"));
    }
    let mut cost = cost_of(&r);
    let mut lambda = 1e-3;
    let mut jac = jacobian(problem, &x, cfg.fd_step);
    let mut converged = false;
    let mut iterations = 0;
    let mut trial = vec![0.0; n];
    let mut r_trial = vec![0.0; m];

    while iterations < cfg.max_iter {
        iterations += 1;
        let rv = DVector::from_column_slice(&r);
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let grad = &jt * &rv;
        let gscale = grad.amax() / (cost.sqrt().max(1e-300));
        if grad.amax() < cfg.gtol || gscale < cfg.gtol {
            converged = true;
            break;
        }
        let diag: Vec<f64> = (0..n).map(|i| jtj[(i, i)].max(1e-12)).collect();
        let mut accepted = false;
        for _ in 0..40 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * diag[i];
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            for i in 0..n {
                trial[i] = x[i] + step[i];
            }
            project(&mut trial, cfg);
            problem.residuals(&trial, &mut r_trial);
            let c_trial = cost_of(&r_trial);
            if c_trial.is_finite() && c_trial < cost {
                let rel_drop = (cost - c_trial) / cost.max(1e-300);
                let step_norm = trial
                    .iter()
                    .zip(&x)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                let x_norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                x.copy_from_slice(&trial);
                r.copy_from_slice(&r_trial);
                cost = c_trial;
                lambda = (lambda / 3.0).max(1e-15);
                accepted = true;
                if rel_drop < cfg.ftol || step_norm < cfg.xtol * (x_norm + cfg.xtol) {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
            if lambda > 1e16 {
                break;
            }
        }
        if !accepted {
            // no descent direction left at this damping: a stationary point
            converged = true;
            break;
        }
        jac = jacobian(problem, &x, cfg.fd_step);
        if converged {
            break;
        }
    }

    Ok(LmReport {
        params: x,
        cost,
        residuals: r,
        jacobian: jac,
        iterations,
        converged,
    })
}

/// Covariance `s^2 (J^T J)^+` restricted to the identifiable subspace.
///
/// `null_directions` lists known exact degeneracies; they are projected out
/// before the rank test. Returns the covariance and the numerical rank of the
/// projected Jacobian.
pub fn covariance(
    jac: &DMatrix<f64>,
    residuals: &[f64],
    null_directions: &[DVector<f64>],
    rel_tol: f64,
) -> (DMatrix<f64>, usize) {
    let m = jac.nrows();
    let n = jac.ncols();
    let mut projector = DMatrix::<f64>::identity(n, n);
    for g in null_directions {
        let g = g.normalize();
        projector -= &g * g.transpose();
    }
    let jp = jac * &projector;
    let svd = jp.svd(true, true);
    let smax = svd.singular_values.amax();
    let rank = svd
        .singular_values
        .iter()
        .filter(|s| **s > rel_tol * smax)
        .count();
    let v_t = svd.v_t.expect("requested V^T");
    let mut pinv = DMatrix::<f64>::zeros(n, n);
    for (k, s) in svd.singular_values.iter().enumerate() {
        if *s > rel_tol * smax {
            let row = v_t.row(k);
            pinv += row.transpose() * row / (s * s);
        }
    }
    let dof = (m as isize - rank as isize).max(1) as f64;
    let s2 = residuals.iter().map(|r| r * r).sum::<f64>() / dof;
    (pinv * s2, rank)
}
