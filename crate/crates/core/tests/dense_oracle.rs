#![allow(clippy::needless_range_loop)]

mod common;

use common::{fd_gradient, random_simplex, random_symmetric_w, tuples, Dense};
use mmotflow_core::coupling::{full_tensor, primal_value, reconstruct_pair_marginal, tensor_marginal};
use mmotflow_core::dual::{derivatives, gradient, objective, psi_from_phi};
use mmotflow_core::{CostBundle, DiscreteMarginal, Grid, ProblemParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn instance(rng: &mut ChaCha8Rng, n: usize, m: usize, eta: f64) -> (ProblemParams, Dense) {
    let w = random_symmetric_w(rng, n);
    let rho = random_simplex(rng, n);
    let grid = Grid::uniform_1d(n, 0.0, 1.0).unwrap();
    let bundle = CostBundle::from_matrix(n, w.clone(), m).unwrap();
    let params = ProblemParams::new(eta, DiscreteMarginal::new(grid, rho.clone()).unwrap(), bundle, 0).unwrap();
    (params, Dense { n, m, eta, rho, w })
}

fn random_phi(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect()
}

#[test]
fn objective_and_plan_match_dense_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for &(n, m) in &[(4, 3), (6, 3), (9, 3), (4, 4), (5, 4), (3, 5)] {
        for &eta in &[0.2, 0.7] {
            let (p, d) = instance(&mut rng, n, m, eta);
            let phi = random_phi(&mut rng, n);
            let eps = rng.gen_range(0.0..1.0);
            let f = objective(&p, &phi, eps).unwrap();
            assert!((f - d.objective(&phi, eps)).abs() < 1e-12 * (1.0 + f.abs()));

            let plan = d.plan(&phi, eps);
            let g = gradient(&p, &phi, eps).unwrap();
            let second = d.marginal(&plan, 1);
            for x in 0..n {
                assert!((g[x] - (m - 1) as f64 * (second[x] - d.rho[x])).abs() < 1e-13);
            }
            let tensor = full_tensor(&p, &phi, eps).unwrap();
            let dev = tensor.iter().zip(&plan).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(dev < 1e-14, "tensor deviation {dev}");
            let pair = reconstruct_pair_marginal(&p, &phi, eps).unwrap();
            let mut dense_pair = vec![0.0; n * n];
            for (x, gval) in tuples(n, m).iter().zip(&plan) {
                dense_pair[x[0] * n + x[1]] += gval;
            }
            for i in 0..n {
                for j in 0..n {
                    assert!((pair[(i, j)] - dense_pair[i * n + j]).abs() < 1e-14);
                }
            }
            let first = tensor_marginal(&tensor, n, m, 0);
            for x in 0..n {
                assert!((first[x] - d.rho[x]).abs() < 1e-13);
            }
            let primal = primal_value(&p, &tensor, eps).unwrap();
            assert!((primal - d.primal(&plan, eps)).abs() < 1e-12);
        }
    }
}

#[test]
fn derivatives_match_finite_differences_of_dense_objective() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for &(n, m) in &[(5, 3), (4, 4)] {
        let (p, d) = instance(&mut rng, n, m, 0.5);
        let phi = random_phi(&mut rng, n);
        let eps = 0.35;
        let der = derivatives(&p, &phi, eps).unwrap();
        let fd = fd_gradient(|x| d.objective(x, eps), &phi, 1e-5);
        for x in 0..n {
            assert!((der.grad[x] - fd[x]).abs() < 1e-8);
        }
        let dense_grad = |x: &[f64], e: f64| fd_gradient(|y| d.objective(y, e), x, 1e-4);
        for col in 0..n {
            let mut a = phi.clone();
            let mut b = phi.clone();
            a[col] += 1e-4;
            b[col] -= 1e-4;
            let ga = dense_grad(&a, eps);
            let gb = dense_grad(&b, eps);
            for row in 0..n {
                let h = (ga[row] - gb[row]) / 2e-4;
                assert!((der.hess[(row, col)] - h).abs() < 1e-5, "hess {row},{col}");
            }
        }
        let ga = dense_grad(&phi, eps + 1e-4);
        let gb = dense_grad(&phi, eps - 1e-4);
        for x in 0..n {
            assert!((der.mixed[x] - (ga[x] - gb[x]) / 2e-4).abs() < 1e-5);
        }
    }
}

#[test]
fn psi_matches_conditional_log_partition() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (p, d) = instance(&mut rng, 5, 3, 0.3);
    let phi = random_phi(&mut rng, 5);
    let psi = psi_from_phi(&p, &phi, 0.6).unwrap();
    let plan = d.plan(&phi, 0.6);
    // psi makes the first marginal of exp((psi + sum phi - c)/eta) prod rho exact
    for z in 0..5 {
        let mut s = 0.0;
        for (x, _) in tuples(5, 3).iter().zip(&plan) {
            if x[0] == z {
                let a = (psi[z] + phi[x[1]] + phi[x[2]] - d.cost(x, 0.6)) / 0.3;
                s += a.exp() * d.rho[x[1]] * d.rho[x[2]];
            }
        }
        assert!((s - 1.0).abs() < 1e-12);
    }
}
