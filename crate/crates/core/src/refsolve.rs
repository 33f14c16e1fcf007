//! Reference minimizer: gradient descent with Armijo backtracking on the
//! reduced dual at fixed `eps`.

use crate::dual::{first_order, objective_increment, Potential, ProblemParams};
use crate::error::{Error, Result};
use crate::linalg::sup_norm;

#[derive(Debug, Clone, Copy)]
pub struct DescentOptions {
    /// Stop when `||grad||_inf <= tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Sufficient-decrease constant.
    pub armijo: f64,
    /// Backtracking factor.
    pub shrink: f64,
    pub initial_step: f64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 1_000_000,
            armijo: 1e-4,
            shrink: 0.5,
            initial_step: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DescentReport {
    pub iterations: usize,
    pub residual: f64,
    pub objective: f64,
    /// Objective after each accepted step, starting with the initial point.
    pub objective_history: Vec<f64>,
    /// `F(phi_{k+1}) - F(phi_k)` of each accepted step.
    pub decreases: Vec<f64>,
}

/// Minimizes the reduced dual over anchored potentials starting at `init`.
///
/// The sufficient-decrease test compares `F(phi + t d) - F(phi)` evaluated by
/// [`objective_increment`], which stays accurate long after the two objective
/// values agree to machine precision.
pub fn minimize_backtracking(
    params: &ProblemParams,
    eps: f64,
    init: &[f64],
    opts: DescentOptions,
) -> Result<(Potential, DescentReport)> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let anchor = params.anchor();
    let mut phi = Potential::anchored(init.to_vec(), anchor).into_values();
    let mut fo = first_order(params, &phi, eps)?;
    let mut objective = fo.objective;
    let mut history = vec![objective];
    let mut decreases = Vec::new();
    let mut iterations = 0;
    loop {
        let residual = sup_norm(&fo.gradient);
        if residual <= opts.tol {
            return Ok((
                Potential::anchored(phi, anchor),
                DescentReport {
                    iterations,
                    residual,
                    objective,
                    objective_history: history,
                    decreases,
                },
            ));
        }
        if iterations >= opts.max_iter {
            return Err(Error::MaxIterExceeded { iterations, residual });
        }
        let mut dir: Vec<f64> = fo.gradient.iter().map(|g| -g).collect();
        dir[anchor] = 0.0;
        let slope: f64 = dir.iter().zip(&fo.gradient).map(|(d, g)| d * g).sum();

        let mut t = opts.initial_step;
        loop {
            let decrease = objective_increment(params, &phi, &fo.log_partition, &dir, t, eps)?;
            if decrease <= opts.armijo * t * slope && decrease < 0.0 {
                objective += decrease;
                decreases.push(decrease);
                break;
            }
            t *= opts.shrink;
            if t < 1e-16 {
                return Err(Error::LineSearchStall { step: t });
            }
        }
        phi.iter_mut().zip(&dir).for_each(|(p, d)| *p += t * d);
        fo = first_order(params, &phi, eps)?;
        history.push(objective);
        iterations += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::{build_cost_matrix, CostBundle, CostKind, DiscreteMarginal, Grid};
    use crate::sinkhorn_mm::{solve_symmetric_mm, MmSinkhornOptions};

    fn log_instance(n: usize, eta: f64) -> ProblemParams {
        let grid = Grid::uniform_1d(n, 0.0, 1.0).unwrap();
        let bundle = build_cost_matrix(&grid, CostKind::Log { offset: 0.1 }, 3).unwrap();
        ProblemParams::new(eta, DiscreteMarginal::uniform(grid), bundle, 0).unwrap()
    }

    #[test]
    fn zero_cost_needs_no_iterations() {
        let grid = Grid::uniform_1d(4, 0.0, 1.0).unwrap();
        let bundle = CostBundle::from_matrix(4, vec![0.0; 16], 3).unwrap();
        let p = ProblemParams::new(0.5, DiscreteMarginal::uniform(grid), bundle, 0).unwrap();
        let (phi, report) = minimize_backtracking(&p, 1.0, &[0.0; 4], DescentOptions::default()).unwrap();
        assert_eq!(report.iterations, 0);
        assert!(phi.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn accepted_steps_strictly_decrease() {
        let p = log_instance(8, 0.3);
        let (_, report) = minimize_backtracking(&p, 0.5, &[0.0; 8], DescentOptions::default()).unwrap();
        assert!(report.iterations > 0);
        assert_eq!(report.decreases.len(), report.iterations);
        assert!(report.decreases.iter().all(|d| *d < 0.0));
        for w in report.objective_history.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn agrees_with_sinkhorn_at_eps_one() {
        let p = log_instance(10, 0.5);
        let opts = DescentOptions { tol: 1e-12, ..Default::default() };
        let (phi, report) = minimize_backtracking(&p, 1.0, &[0.0; 10], opts).unwrap();
        let (phi_s, sk) = solve_symmetric_mm(&p, 1.0, None, MmSinkhornOptions { tol: 1e-12, ..Default::default() })
            .unwrap();
        assert!((report.objective - sk.objective).abs() < 1e-9);
        for (a, b) in phi.values().iter().zip(phi_s.values()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn solution_does_not_depend_on_start() {
        let p = log_instance(7, 0.4);
        let opts = DescentOptions { tol: 1e-12, ..Default::default() };
        let (a, _) = minimize_backtracking(&p, 0.8, &[0.0; 7], opts).unwrap();
        let start = [1.0, -2.0, 0.5, 3.0, -1.0, 0.25, 2.0];
        let (b, _) = minimize_backtracking(&p, 0.8, &start, opts).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-8);
        }
    }
}
