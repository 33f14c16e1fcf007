//! Damped multi-marginal Sinkhorn for the symmetric problem at fixed `eps`.
//!
//! The undamped update `phi <- phi - eta log(gamma_2 / rho)` would be the exact
//! block update for one of the `m - 1` coordinates sharing `phi`; applying it
//! to all of them at once overshoots. Averaging it over the `m - 1`
//! coordinates (step `1/(m-1)`, i.e. `1/2` for three marginals) keeps the dual
//! objective monotone by convexity.

use crate::dual::{first_order, Potential, ProblemParams};
use crate::error::{Error, Result};
use crate::linalg::sup_norm;

#[derive(Debug, Clone, Copy)]
pub struct MmSinkhornOptions {
    /// Stop when `||grad||_inf <= tol`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MmSinkhornOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 200_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MmSinkhornReport {
    pub iterations: usize,
    pub residual: f64,
    pub objective: f64,
    /// Objective before each update and after the last one.
    pub objective_history: Vec<f64>,
}

/// Solves the symmetric problem at `eps`, starting from `init` (zeros when
/// `None`). The result is anchored.
pub fn solve_symmetric_mm(
    params: &ProblemParams,
    eps: f64,
    init: Option<&[f64]>,
    opts: MmSinkhornOptions,
) -> Result<(Potential, MmSinkhornReport)> {
    let n = params.n();
    let mut phi = match init {
        Some(v) if v.len() == n => v.to_vec(),
        Some(v) => {
            return Err(Error::InvalidInput(format!("initial potential has {} entries, expected {n}", v.len())))
        }
        None => vec![0.0; n],
    };
    let step = params.eta() / (params.marginals() - 1) as f64;
    let rho = params.weights();
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        let fo = first_order(params, &phi, eps)?;
        history.push(fo.objective);
        let residual = sup_norm(&fo.gradient);
        if residual <= opts.tol {
            let potential = Potential::anchored(phi, params.anchor());
            return Ok((
                potential,
                MmSinkhornReport {
                    iterations,
                    residual,
                    objective: fo.objective,
                    objective_history: history,
                },
            ));
        }
        if iterations >= opts.max_iter {
            return Err(Error::MaxIterExceeded { iterations, residual });
        }
        for ((p, g), r) in phi.iter_mut().zip(&fo.marginal).zip(rho) {
            *p -= step * (g / r).ln();
        }
        iterations += 1;
    }
}
