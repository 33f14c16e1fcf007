//! Benchmark fixtures.

use mmotflow_core::costs::build_cost_matrix;
use mmotflow_core::euler_chain::{euler_initial, EulerProblem, FinalMap, PotentialStack};
use mmotflow_core::two_marginal::solve_initial;
use mmotflow_core::{CostKind, DiscreteMarginal, Grid, ProblemParams};

/// Log cost `-log(0.1 + |x - y|)` on `n` midpoints of `[0, 1]`.
pub fn log_instance(n: usize, m: usize, eta: f64) -> ProblemParams {
    let grid = Grid::uniform_1d(n, 0.0, 1.0).unwrap();
    let bundle = build_cost_matrix(&grid, CostKind::Log { offset: 0.1 }, m).unwrap();
    ProblemParams::new(eta, DiscreteMarginal::uniform(grid), bundle, 0).unwrap()
}

/// The two-marginal potential of `log_instance`.
pub fn initial_potential(params: &ProblemParams) -> Vec<f64> {
    solve_initial(params, 1e-10, 1_000_000).unwrap().phi
}

/// Reflected chain problem with its `eps = 0` potentials.
pub fn chain_instance(n: usize, m: usize, eta: f64) -> (EulerProblem, PotentialStack) {
    let grid = Grid::uniform_1d(n, 0.0, 1.0).unwrap();
    let p = EulerProblem::new(DiscreteMarginal::uniform(grid), m, 20.0, &FinalMap::Reflect, eta).unwrap();
    let s = euler_initial(&p, 1e-10, 1_000_000).unwrap();
    (p, s)
}
