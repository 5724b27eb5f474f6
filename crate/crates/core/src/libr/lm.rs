//! Damped least-squares (Levenberg-Marquardt) over a black-box residual.
//!
//! The Jacobian comes from forward finite differences of the full residual,
//! which stays robust when surface correspondences switch discontinuously
//! between iterations. Steps are accepted only if the squared-residual
//! objective strictly decreases.

use nalgebra::Cholesky;
use rayon::prelude::*;

use crate::{DMat, DVec, Error, Result};

/// Damping cap; failing to find a downhill step below this counts as a
/// singular normal matrix.
const MAX_DAMPING: f64 = 1e12;

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Terminate once the accepted-step objective change drops below this.
    pub termination_tol: f64,
    pub initial_damping: f64,
    pub damping_increase: f64,
    pub damping_decrease: f64,
    /// Forward-difference step, applied per component in its natural units.
    pub fd_step: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            termination_tol: 1e-12,
            initial_damping: 1e-3,
            damping_increase: 10.0,
            damping_decrease: 0.1,
            fd_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmResult {
    pub beta: DVec,
    /// Final objective (squared norm of the residual vector).
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective decrease of the last accepted step.
    pub last_delta: f64,
}

/// Minimizes ||residual(beta)||^2 from `beta0`.
pub fn levenberg_marquardt<F>(residual: F, beta0: DVec, opts: &LmOptions) -> Result<LmResult>
where
    F: Fn(&DVec) -> Result<DVec> + Sync,
{
    let mut beta = beta0;
    let mut r = residual(&beta)?;
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(
            "non-finite residuals at the initial point".into(),
        ));
    }
    let mut omega = r.norm_squared();
    let mut lambda = opts.initial_damping;
    let mut iterations = 0usize;
    let mut converged = omega <= opts.termination_tol;
    let mut last_delta = f64::INFINITY;

    while !converged && iterations < opts.max_iterations {
        iterations += 1;
        let jac = fd_jacobian(&residual, &beta, &r, opts.fd_step)?;
        let h = jac.tr_mul(&jac);
        let g = jac.tr_mul(&r);

        let mut accepted = false;
        while !accepted {
            let mut a = h.clone();
            for i in 0..a.nrows() {
                a[(i, i)] += lambda * h[(i, i)].max(1e-12);
            }
            if let Some(chol) = Cholesky::new(a) {
                let delta = chol.solve(&(-&g));
                if delta.iter().all(|v| v.is_finite()) {
                    let beta_try = &beta + &delta;
                    if let Ok(r_try) = residual(&beta_try) {
                        let omega_try = r_try.norm_squared();
                        if omega_try.is_finite() && omega_try < omega {
                            last_delta = omega - omega_try;
                            beta = beta_try;
                            r = r_try;
                            omega = omega_try;
                            lambda = (lambda * opts.damping_decrease).max(1e-15);
                            accepted = true;
                        }
                    }
                }
            }
            if !accepted {
                lambda *= opts.damping_increase;
                if lambda > MAX_DAMPING {
                    return Ok(LmResult {
                        beta,
                        objective: omega,
                        iterations,
                        converged: false,
                        last_delta,
                    });
                }
            }
        }
        if last_delta < opts.termination_tol {
            converged = true;
        }
    }

    Ok(LmResult {
        beta,
        objective: omega,
        iterations,
        converged,
        last_delta: if last_delta.is_finite() { last_delta } else { 0.0 },
    })
}

/// Forward-difference Jacobian; columns are independent residual
/// evaluations and run in parallel, each written once to its own storage.
fn fd_jacobian<F>(residual: &F, beta: &DVec, r0: &DVec, step: f64) -> Result<DMat>
where
    F: Fn(&DVec) -> Result<DVec> + Sync,
{
    let n = beta.len();
    let m = r0.len();
    let columns: Vec<Result<DVec>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut b = beta.clone();
            b[j] += step;
            let rj = residual(&b)?;
            if rj.len() != m {
                return Err(Error::DimensionMismatch(format!(
                    "residual length changed from {m} to {} at parameter {j}",
                    rj.len()
                )));
            }
            Ok((rj - r0) / step)
        })
        .collect();
    let mut jac = DMat::zeros(m, n);
    for (j, col) in columns.into_iter().enumerate() {
        jac.column_mut(j).copy_from(&col?);
    }
    Ok(jac)
}
