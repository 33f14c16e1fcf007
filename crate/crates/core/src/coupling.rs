//! Gibbs couplings reconstructed from potentials, their marginals, and the
//! regularized primal objective.

use nalgebra::DMatrix;

use crate::dual::{psi_from_phi, ProblemParams};
use crate::enumerate::{for_each_tuple, Order};
use crate::error::{Error, Result};

/// Largest full tensor that will be materialized.
pub const FULL_TENSOR_LIMIT: u128 = 1_000_000;

/// Relative threshold defining the plotted support of a plan.
pub const SUPPORT_THRESHOLD: f64 = 1e-3;

/// Two-fold marginal `gamma_{1,2}` with the first coordinate on rows.
pub fn reconstruct_pair_marginal(params: &ProblemParams, phi: &[f64], eps: f64) -> Result<DMatrix<f64>> {
    Ok(params.moments(phi, eps, Order::First)?.pair12)
}

/// Row-major full plan `gamma(x1..xm) = exp((psi_{x1} + sum phi - c_eps)/eta) prod rho`.
pub fn full_tensor(params: &ProblemParams, phi: &[f64], eps: f64) -> Result<Vec<f64>> {
    let n = params.n();
    let m = params.marginals();
    let required = (n as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
    if required > FULL_TENSOR_LIMIT {
        return Err(Error::SizeGuard {
            required,
            budget: FULL_TENSOR_LIMIT,
        });
    }
    let psi = psi_from_phi(params, phi, eps)?;
    let eta = params.eta();
    let log_rho: Vec<f64> = params.weights().iter().map(|r| r.ln()).collect();
    let bundle = params.bundle();
    let mut out = Vec::with_capacity(required as usize);
    for_each_tuple(n, m, |idx| {
        let (c, _) = bundle.epsilon_cost_unchecked(idx, eps);
        let mut a = psi[idx[0]] - c;
        let mut lr = 0.0;
        for &i in idx {
            lr += log_rho[i];
        }
        for &i in &idx[1..] {
            a += phi[i];
        }
        out.push((a / eta + lr).exp());
    });
    Ok(out)
}

/// One-fold marginal along `axis` of a row-major `n^m` tensor.
pub fn tensor_marginal(tensor: &[f64], n: usize, m: usize, axis: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    let mut k = 0;
    for_each_tuple(n, m, |idx| {
        out[idx[axis]] += tensor[k];
        k += 1;
    });
    out
}

/// Two-fold marginal on axes `(a, b)`, with axis `a` on rows.
pub fn tensor_pair_marginal(tensor: &[f64], n: usize, m: usize, a: usize, b: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n, n);
    let mut k = 0;
    for_each_tuple(n, m, |idx| {
        out[(idx[a], idx[b])] += tensor[k];
        k += 1;
    });
    out
}

fn entropy_term(t: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else {
        t * (t.ln() - 1.0)
    }
}

/// `sum c_eps gamma + eta [H(gamma) - H(rho x .. x rho)]` with
/// `H(gamma) = sum t (log t - 1)`.
pub fn primal_value(params: &ProblemParams, gamma: &[f64], eps: f64) -> Result<f64> {
    let n = params.n();
    let m = params.marginals();
    let expected = n.pow(m as u32);
    if gamma.len() != expected {
        return Err(Error::InvalidInput(format!("tensor has {} entries, expected {expected}", gamma.len())));
    }
    if let Some((index, &value)) = gamma.iter().enumerate().find(|(_, v)| **v < 0.0 || v.is_nan()) {
        return Err(Error::NegativeEntry { index, value });
    }
    let rho = params.weights();
    let bundle = params.bundle();
    let mut transport = 0.0;
    let mut entropy = 0.0;
    let mut reference = 0.0;
    let mut k = 0;
    for_each_tuple(n, m, |idx| {
        let g = gamma[k];
        transport += bundle.epsilon_cost_unchecked(idx, eps).0 * g;
        entropy += entropy_term(g);
        reference += entropy_term(idx.iter().map(|&i| rho[i]).product());
        k += 1;
    });
    Ok(transport + params.eta() * (entropy - reference))
}

/// Entries at least `SUPPORT_THRESHOLD` times the largest entry.
pub fn support_mask(plan: &DMatrix<f64>) -> DMatrix<bool> {
    let cut = plan.max() * SUPPORT_THRESHOLD;
    plan.map(|v| v >= cut)
}

/// Reconstructed plan at one potential.
#[derive(Debug, Clone)]
pub struct CouplingView {
    pub pair12: DMatrix<f64>,
    pub support: DMatrix<bool>,
    /// Full tensor and its primal value when small enough to materialize.
    pub tensor: Option<Vec<f64>>,
    pub primal: Option<f64>,
}

pub fn coupling_view(params: &ProblemParams, phi: &[f64], eps: f64) -> Result<CouplingView> {
    let pair12 = reconstruct_pair_marginal(params, phi, eps)?;
    let support = support_mask(&pair12);
    let (tensor, primal) = match full_tensor(params, phi, eps) {
        Ok(t) => {
            let p = primal_value(params, &t, eps)?;
            (Some(t), Some(p))
        }
        Err(Error::SizeGuard { .. }) => (None, None),
        Err(e) => return Err(e),
    };
    Ok(CouplingView {
        pair12,
        support,
        tensor,
        primal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::{build_cost_matrix, CostBundle, CostKind, DiscreteMarginal, Grid};

    fn zero_cost(n: usize) -> ProblemParams {
        let grid = Grid::uniform_1d(n, 0.0, 1.0).unwrap();
        let bundle = CostBundle::from_matrix(n, vec![0.0; n * n], 3).unwrap();
        let rho = DiscreteMarginal::new(grid, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        ProblemParams::new(0.5, rho, bundle, 0).unwrap()
    }

    #[test]
    fn zero_cost_plan_is_product() {
        let p = zero_cost(4);
        let g = reconstruct_pair_marginal(&p, &[0.0; 4], 0.3).unwrap();
        let rho = p.weights();
        for i in 0..4 {
            for j in 0..4 {
                assert!((g[(i, j)] - rho[i] * rho[j]).abs() < 1e-15);
            }
        }
        let t = full_tensor(&p, &[0.0; 4], 0.3).unwrap();
        assert!(primal_value(&p, &t, 0.3).unwrap().abs() < 1e-15);
    }

    #[test]
    fn tensor_and_moment_routes_agree() {
        let grid = Grid::uniform_1d(5, 0.0, 1.0).unwrap();
        let bundle = build_cost_matrix(&grid, CostKind::NegHarmonic, 3).unwrap();
        let p = ProblemParams::new(0.2, DiscreteMarginal::uniform(grid), bundle, 0).unwrap();
        let phi = [0.0, 0.1, -0.2, 0.05, 0.3];
        let t = full_tensor(&p, &phi, 0.4).unwrap();
        let g12 = reconstruct_pair_marginal(&p, &phi, 0.4).unwrap();
        assert!((tensor_pair_marginal(&t, 5, 3, 0, 1) - &g12).amax() < 1e-15);
        // symmetric in coordinates 2..m
        assert!((tensor_pair_marginal(&t, 5, 3, 0, 2) - &g12).amax() < 1e-15);
        let first = tensor_marginal(&t, 5, 3, 0);
        assert!(first.iter().all(|v| (v - 0.2).abs() < 1e-15));
    }

    #[test]
    fn negative_entries_are_rejected() {
        let p = zero_cost(4);
        let mut t = vec![1.0 / 64.0; 64];
        t[5] = -1e-3;
        assert!(matches!(primal_value(&p, &t, 0.0), Err(Error::NegativeEntry { index: 5, .. })));
        assert!(primal_value(&p, &t[..10], 0.0).is_err());
    }

    #[test]
    fn support_threshold() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1e-4, 2e-3, 0.5]);
        let s = support_mask(&m);
        assert!(s[(0, 0)] && !s[(0, 1)] && s[(1, 0)] && s[(1, 1)]);
    }

    #[test]
    fn view_skips_large_tensors() {
        let grid = Grid::uniform_1d(120, 0.0, 1.0).unwrap();
        let bundle = build_cost_matrix(&grid, CostKind::Log { offset: 0.1 }, 3).unwrap();
        let p = ProblemParams::new(0.5, DiscreteMarginal::uniform(grid), bundle, 0).unwrap();
        let v = coupling_view(&p, &[0.0; 120], 0.0).unwrap();
        assert!(v.tensor.is_none() && v.primal.is_none());
        assert_eq!(v.pair12.nrows(), 120);
    }
}
