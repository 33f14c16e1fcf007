use mmotflow_core::costs::build_cost_matrix;
use mmotflow_core::linalg::sup_norm;
use mmotflow_core::ode::{integrate, IntegrateOptions};
use mmotflow_core::refsolve::{minimize_backtracking, DescentOptions};
use mmotflow_core::sinkhorn_mm::{solve_symmetric_mm, MmSinkhornOptions};
use mmotflow_core::study::halving_ratios;
use mmotflow_core::two_marginal::solve_initial;
use mmotflow_core::{CostKind, DiscreteMarginal, Error, Grid, Potential, ProblemParams, Scheme};

fn params(kind: CostKind, n: usize, eta: f64) -> ProblemParams {
    let grid = Grid::uniform_1d(n, 0.0, 1.0).unwrap();
    let kind = match kind {
        CostKind::CoulombTruncated { .. } => CostKind::coulomb_default(&grid),
        k => k,
    };
    let bundle = build_cost_matrix(&grid, kind, 3).unwrap();
    ProblemParams::new(eta, DiscreteMarginal::uniform(grid), bundle, 0).unwrap()
}

fn start(p: &ProblemParams) -> Potential {
    Potential::anchored(solve_initial(p, 1e-12, 1_000_000).unwrap().phi, p.anchor())
}

#[test]
fn euler_residual_shrinks_with_the_step() {
    let p = params(CostKind::Log { offset: 0.1 }, 20, 0.1);
    let phi0 = start(&p);
    let mut pts = Vec::new();
    for h in [0.1, 0.05, 0.025, 0.0125] {
        let t = integrate(&p, &phi0, Scheme::Euler, h, IntegrateOptions::default()).unwrap();
        let worst = t.diagnostics.iter().map(|d| d.grad_norm).fold(0.0, f64::max);
        pts.push((h, worst));
    }
    for r in halving_ratios(&pts) {
        assert!(r >= 1.5, "ratio {r} in {pts:?}");
    }
}

#[test]
fn trajectories_respect_bound_and_convexity() {
    for kind in [CostKind::Log { offset: 0.1 }, CostKind::NegHarmonic, CostKind::CoulombTruncated { cap: 0.0 }] {
        let p = params(kind, 16, 0.1);
        let phi0 = start(&p);
        for scheme in Scheme::ALL {
            let t = integrate(&p, &phi0, scheme, 0.05, IntegrateOptions::default()).unwrap();
            assert_eq!(t.eps.len(), 21);
            assert_eq!(t.spd_solves, 20 * scheme.tableau().stages());
            for d in &t.diagnostics {
                assert!(d.phi_sup <= p.potential_bound());
                assert!(d.min_eigenvalue.unwrap() > 0.0);
            }
            assert!(t.potentials.iter().all(|v| v.values()[0] == 0.0));
            assert_eq!(t.at(0.5).values(), t.potentials[10].values());
        }
    }
}

#[test]
fn trajectory_points_are_near_optimal() {
    let p = params(CostKind::Log { offset: 0.1 }, 24, 0.05);
    let phi0 = start(&p);
    let t = integrate(&p, &phi0, Scheme::Rk5, 0.01, IntegrateOptions::default()).unwrap();
    for k in (0..=100).step_by(10) {
        let (_, rep) = solve_symmetric_mm(&p, t.eps[k], Some(t.potentials[k].values()), MmSinkhornOptions { tol: 1e-8, max_iter: 20 }).unwrap();
        assert!(rep.iterations <= 20);
    }
    let (best, rep) = minimize_backtracking(&p, 1.0, t.endpoint().values(), DescentOptions { tol: 1e-10, max_iter: 10, ..Default::default() }).unwrap();
    assert!(rep.iterations <= 10);
    let diff: Vec<f64> = best.values().iter().zip(t.endpoint().values()).map(|(a, b)| a - b).collect();
    assert!(sup_norm(&diff) / best.sup_norm() < 1e-6);
}

#[test]
fn rejects_bad_steps_and_inputs() {
    let p = params(CostKind::Log { offset: 0.1 }, 6, 0.2);
    let phi0 = start(&p);
    assert!(matches!(integrate(&p, &phi0, Scheme::Rk3, 0.3, IntegrateOptions::default()), Err(Error::InvalidInput(_))));
    assert!(integrate(&p, &Potential::zeros(5, 0), Scheme::Rk3, 0.5, IntegrateOptions::default()).is_err());
}
