//! Entropic two-marginal transport in the log domain.
//!
//! At `eps = 0` the multi-marginal problem factors through the two-marginal
//! problems between the first marginal and each of the others: the optimal
//! plan is `gamma = prod_i [pi_i(x1, xi) / rho(x1)] * rho(x1)` and the optimal
//! potentials are `phi^1 = sum_i psi^i`, `phi^i` = second potential of the
//! `i`-th problem.

use crate::dual::ProblemParams;
use crate::enumerate::for_each_tuple;
use crate::error::{Error, Result};
use crate::logsum::log_sum_exp;

/// Result of a two-marginal Sinkhorn solve.
#[derive(Debug, Clone)]
pub struct TwoMarginalSolution {
    /// Potential on the first marginal.
    pub psi: Vec<f64>,
    /// Potential on the second marginal, with `phi[anchor] = 0`.
    pub phi: Vec<f64>,
    /// Row-major `n x n` plan `exp((psi_i + phi_j - W_ij)/eta) mu_i nu_j`.
    pub plan: Vec<f64>,
    pub n: usize,
    pub iterations: usize,
    /// Sup-norm row-marginal error after the last iteration.
    pub residual: f64,
    /// Residual after each iteration.
    pub residual_history: Vec<f64>,
}

impl TwoMarginalSolution {
    pub fn plan_entry(&self, i: usize, j: usize) -> f64 {
        self.plan[i * self.n + j]
    }
}

/// Options for [`sinkhorn_two_marginal`].
#[derive(Debug, Clone, Copy)]
pub struct SinkhornOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub anchor: usize,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 1_000_000,
            anchor: 0,
        }
    }
}

/// Alternating log-domain Sinkhorn updates for the plan between `mu` (rows)
/// and `nu` (columns) with row-major cost `w`.
pub fn sinkhorn_two_marginal(
    mu: &[f64],
    nu: &[f64],
    w: &[f64],
    eta: f64,
    opts: SinkhornOptions,
) -> Result<TwoMarginalSolution> {
    let n = mu.len();
    if nu.len() != n || w.len() != n * n {
        return Err(Error::InvalidInput("marginal and cost sizes disagree".into()));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {}", opts.tol)));
    }
    if !(eta > 0.0) {
        return Err(Error::InvalidInput(format!("eta must be positive, got {eta}")));
    }
    if opts.anchor >= n {
        return Err(Error::InvalidInput(format!("anchor {} out of range", opts.anchor)));
    }
    let log_mu: Vec<f64> = mu.iter().map(|v| v.ln()).collect();
    let log_nu: Vec<f64> = nu.iter().map(|v| v.ln()).collect();
    let mut psi = vec![0.0; n];
    let mut phi = vec![0.0; n];
    let mut buf = vec![0.0; n];
    let mut history = Vec::new();

    // psi_i = -eta log sum_j exp((phi_j - W_ij)/eta) nu_j
    let update_rows = |psi: &mut [f64], phi: &[f64], buf: &mut [f64]| {
        for i in 0..n {
            for j in 0..n {
                buf[j] = (phi[j] - w[i * n + j]) / eta + log_nu[j];
            }
            psi[i] = -eta * log_sum_exp(buf);
        }
    };
    let update_cols = |phi: &mut [f64], psi: &[f64], buf: &mut [f64]| {
        for j in 0..n {
            for i in 0..n {
                buf[i] = (psi[i] - w[i * n + j]) / eta + log_mu[i];
            }
            phi[j] = -eta * log_sum_exp(buf);
        }
    };
    // Columns are exact after the column update; measure the rows.
    let row_residual = |psi: &[f64], phi: &[f64], buf: &mut [f64]| {
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                buf[j] = (phi[j] - w[i * n + j]) / eta + log_nu[j];
            }
            let row = (psi[i] / eta + log_mu[i] + log_sum_exp(buf)).exp();
            worst = worst.max((row - mu[i]).abs());
        }
        worst
    };

    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    while iterations < opts.max_iter {
        update_rows(&mut psi, &phi, &mut buf);
        update_cols(&mut phi, &psi, &mut buf);
        iterations += 1;
        residual = row_residual(&psi, &phi, &mut buf);
        history.push(residual);
        if residual <= opts.tol {
            break;
        }
    }
    if residual > opts.tol {
        return Err(Error::MaxIterExceeded { iterations, residual });
    }

    let shift = phi[opts.anchor];
    phi.iter_mut().for_each(|v| *v -= shift);
    psi.iter_mut().for_each(|v| *v += shift);

    let mut plan = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            plan[i * n + j] = ((psi[i] + phi[j] - w[i * n + j]) / eta + log_mu[i] + log_nu[j]).exp();
        }
    }

    Ok(TwoMarginalSolution {
        psi,
        phi,
        plan,
        n,
        iterations,
        residual,
        residual_history: history,
    })
}

/// Solves the two-marginal problem `(rho, rho, W)` of a symmetric instance;
/// its anchored second potential is the exact `eps = 0` multi-marginal
/// potential.
pub fn solve_initial(params: &ProblemParams, tol: f64, max_iter: usize) -> Result<TwoMarginalSolution> {
    let rho = params.weights();
    sinkhorn_two_marginal(
        rho,
        rho,
        params.bundle().matrix(),
        params.eta(),
        SinkhornOptions {
            tol,
            max_iter,
            anchor: params.anchor(),
        },
    )
}

/// Row-major full tensor of the `eps = 0` optimal plan,
/// `gamma(x1..xm) = prod_{i>=2} [pi_i(x1, xi) / rho(x1)] * rho(x1)`.
pub fn product_plan_eps0(solutions: &[TwoMarginalSolution], rho: &[f64], budget: u128) -> Result<Vec<f64>> {
    let n = rho.len();
    if solutions.is_empty() || solutions.iter().any(|s| s.n != n) {
        return Err(Error::InvalidInput("need m - 1 solutions on the same grid".into()));
    }
    let m = solutions.len() + 1;
    let required = (n as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
    if required > budget {
        return Err(Error::SizeGuard { required, budget });
    }
    let mut out = Vec::with_capacity(required as usize);
    for_each_tuple(n, m, |idx| {
        let first = idx[0];
        let mut g = rho[first];
        for (s, &xi) in solutions.iter().zip(&idx[1..]) {
            g *= s.plan_entry(first, xi) / rho[first];
        }
        out.push(g);
    });
    Ok(out)
}
