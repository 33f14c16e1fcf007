//! The reduced dual objective of the symmetric equal-marginal problem and
//! its derivatives.
//!
//! With all marginals equal to `rho` and the cost symmetric in `x2..xm`, the
//! dual has a single potential `phi` (shared by coordinates `2..m`); the
//! first-coordinate potential is eliminated in closed form,
//! `psi_z = -eta L_z(phi)`, leaving
//!
//! ```text
//! F(phi, eps) = -(m-1) <phi, rho> + eta sum_z rho_z L_z(phi, eps)
//! ```
//!
//! which is convex, invariant under `phi -> phi + c`, and strictly convex
//! once `phi[anchor] = 0` is imposed. In terms of the Gibbs plan `gamma` the
//! derivatives are
//!
//! ```text
//! grad  = (m-1) (gamma_2 - rho)
//! hess  = (m-1)/eta [diag(gamma_2) + (m-2) gamma_23 - (m-1) gamma_12^T diag(1/rho) gamma_12]
//! mixed = (m-1)/eta [gamma_12^T E - D]
//! ```
//!
//! where `E_z = E[d_eps c | x1 = z]` and `D_w = sum gamma d_eps c [x2 = w]`.

use nalgebra::DMatrix;

use crate::costs::{CostBundle, DiscreteMarginal};
use crate::enumerate::{Enumerator, Moments, Order};
use crate::error::{Error, Result};

/// Default cap on the number of tuples enumerated per first coordinate.
pub const DEFAULT_ENUMERATION_BUDGET: u128 = 10_000_000;

/// Everything that defines a symmetric instance.
#[derive(Debug, Clone)]
pub struct ProblemParams {
    eta: f64,
    marginals: usize,
    rho: DiscreteMarginal,
    bundle: CostBundle,
    anchor: usize,
    budget: u128,
}

impl ProblemParams {
    pub fn new(eta: f64, rho: DiscreteMarginal, bundle: CostBundle, anchor: usize) -> Result<Self> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::InvalidInput(format!("eta must be positive, got {eta}")));
        }
        let marginals = bundle.marginals();
        if marginals < 3 {
            return Err(Error::InvalidInput(format!("need at least 3 marginals, got {marginals}")));
        }
        if bundle.n() != rho.len() {
            return Err(Error::InvalidInput(format!(
                "cost matrix is {}x{} but the marginal has {} points",
                bundle.n(),
                bundle.n(),
                rho.len()
            )));
        }
        if anchor >= rho.len() {
            return Err(Error::InvalidInput(format!("anchor {anchor} out of range")));
        }
        Ok(Self {
            eta,
            marginals,
            rho,
            bundle,
            anchor,
            budget: DEFAULT_ENUMERATION_BUDGET,
        })
    }

    pub fn with_budget(mut self, budget: u128) -> Self {
        self.budget = budget;
        self
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn marginals(&self) -> usize {
        self.marginals
    }

    pub fn rho(&self) -> &DiscreteMarginal {
        &self.rho
    }

    pub fn weights(&self) -> &[f64] {
        self.rho.weights()
    }

    pub fn bundle(&self) -> &CostBundle {
        &self.bundle
    }

    pub fn anchor(&self) -> usize {
        self.anchor
    }

    pub fn n(&self) -> usize {
        self.rho.len()
    }

    pub fn budget(&self) -> u128 {
        self.budget
    }

    /// The a-priori bound `4M` on optimal anchored potentials.
    pub fn potential_bound(&self) -> f64 {
        4.0 * self.bundle.sup_bound()
    }

    pub(crate) fn check_size(&self, slots: usize) -> Result<()> {
        let required = (self.n() as u128).checked_pow(slots as u32).unwrap_or(u128::MAX);
        if required > self.budget {
            return Err(Error::SizeGuard {
                required,
                budget: self.budget,
            });
        }
        Ok(())
    }

    fn check_inputs(&self, phi: &[f64], eps: f64) -> Result<()> {
        if phi.len() != self.n() {
            return Err(Error::InvalidInput(format!(
                "potential has {} entries, expected {}",
                phi.len(),
                self.n()
            )));
        }
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::InvalidInput(format!("epsilon {eps} outside [0, 1]")));
        }
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("potential has non-finite entries".into()));
        }
        self.check_size(self.marginals - 1)
    }

    pub(crate) fn moments(&self, phi: &[f64], eps: f64, order: Order) -> Result<Moments> {
        self.check_inputs(phi, eps)?;
        let e = Enumerator::new(&self.bundle, self.rho.weights(), self.marginals, self.eta, phi, eps);
        Ok(e.moments(order))
    }
}

/// A dual potential normalized by `values[anchor] = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    values: Vec<f64>,
    anchor: usize,
}

impl Potential {
    /// Shifts `values` so that the anchor entry is zero.
    pub fn anchored(mut values: Vec<f64>, anchor: usize) -> Self {
        let shift = values[anchor];
        values.iter_mut().for_each(|v| *v -= shift);
        Self { values, anchor }
    }

    pub fn zeros(n: usize, anchor: usize) -> Self {
        Self {
            values: vec![0.0; n],
            anchor,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn anchor(&self) -> usize {
        self.anchor
    }

    pub fn sup_norm(&self) -> f64 {
        crate::linalg::sup_norm(&self.values)
    }
}

/// Objective and gradient from a single enumeration pass.
#[derive(Debug, Clone)]
pub struct FirstOrder {
    pub objective: f64,
    pub gradient: Vec<f64>,
    /// One-fold marginal `gamma_2` of the Gibbs plan.
    pub marginal: Vec<f64>,
    /// `L_z`, so that `psi_z = -eta L_z`.
    pub log_partition: Vec<f64>,
}

/// Intermediate Gibbs sums behind the derivatives.
#[derive(Debug, Clone)]
pub struct GibbsAux {
    /// `log rho_bar_y = log rho_y - L_y`.
    pub log_rho_bar: Vec<f64>,
    /// `I1 = gamma_2`.
    pub i1: Vec<f64>,
    /// `[(e^{phi/eta} rho) (x) (e^{phi/eta} rho)] . I2 = gamma_23`, stored
    /// pre-multiplied since `I2` alone overflows for small `eta`.
    pub scaled_i2: DMatrix<f64>,
    /// `gamma_12`; row `y` divided by `rho_y` is `I3^y`.
    pub pair12: DMatrix<f64>,
    /// `E[d_eps c | x1 = z]`.
    pub cond_d_eps: Vec<f64>,
    /// `sum gamma d_eps c [x2 = w]`.
    pub weighted_d_eps: Vec<f64>,
}

impl GibbsAux {
    pub fn i3(&self, y: usize, rho: &[f64]) -> Vec<f64> {
        self.pair12.row(y).iter().map(|g| g / rho[y]).collect()
    }
}

/// Gradient, Hessian and `d/d eps` of the gradient at one point.
#[derive(Debug, Clone)]
pub struct DualDerivatives {
    pub objective: f64,
    pub grad: Vec<f64>,
    pub hess: DMatrix<f64>,
    pub mixed: Vec<f64>,
    pub aux: GibbsAux,
}

fn objective_from(params: &ProblemParams, phi: &[f64], log_partition: &[f64]) -> f64 {
    let m1 = (params.marginals - 1) as f64;
    let rho = params.weights();
    let linear: f64 = phi.iter().zip(rho).map(|(p, r)| p * r).sum();
    let lse: f64 = log_partition.iter().zip(rho).map(|(l, r)| l * r).sum();
    -m1 * linear + params.eta * lse
}

fn marginal_from(pair12: &DMatrix<f64>) -> Vec<f64> {
    pair12.row_sum().iter().copied().collect()
}

/// Evaluates the reduced dual objective.
pub fn objective(params: &ProblemParams, phi: &[f64], eps: f64) -> Result<f64> {
    Ok(first_order(params, phi, eps)?.objective)
}

/// Evaluates the gradient of the reduced dual objective.
pub fn gradient(params: &ProblemParams, phi: &[f64], eps: f64) -> Result<Vec<f64>> {
    Ok(first_order(params, phi, eps)?.gradient)
}

pub fn first_order(params: &ProblemParams, phi: &[f64], eps: f64) -> Result<FirstOrder> {
    let mom = params.moments(phi, eps, Order::First)?;
    let m1 = (params.marginals - 1) as f64;
    let marginal = marginal_from(&mom.pair12);
    let gradient = marginal
        .iter()
        .zip(params.weights())
        .map(|(g, r)| m1 * (g - r))
        .collect();
    Ok(FirstOrder {
        objective: objective_from(params, phi, &mom.log_partition),
        gradient,
        marginal,
        log_partition: mom.log_partition,
    })
}

/// Evaluates the Hessian with respect to `phi`.
pub fn hessian(params: &ProblemParams, phi: &[f64], eps: f64) -> Result<DMatrix<f64>> {
    Ok(derivatives(params, phi, eps)?.hess)
}

/// Evaluates `d/d eps` of the gradient.
pub fn mixed_eps_gradient(params: &ProblemParams, phi: &[f64], eps: f64) -> Result<Vec<f64>> {
    Ok(derivatives(params, phi, eps)?.mixed)
}

/// All first and second derivatives from one pair of enumeration passes.
pub fn derivatives(params: &ProblemParams, phi: &[f64], eps: f64) -> Result<DualDerivatives> {
    let mom = params.moments(phi, eps, Order::Second)?;
    let n = params.n();
    let m = params.marginals as f64;
    let eta = params.eta;
    let rho = params.weights();

    let i1 = marginal_from(&mom.pair12);
    let pair23 = mom.pair23.expect("second-order moments");
    let weighted = mom.weighted_d_eps.expect("second-order moments");

    let grad: Vec<f64> = i1.iter().zip(rho).map(|(g, r)| (m - 1.0) * (g - r)).collect();

    // gamma_12^T diag(1/rho) gamma_12
    let mut scaled = mom.pair12.clone();
    for (y, mut row) in scaled.row_iter_mut().enumerate() {
        row /= rho[y];
    }
    let cross = mom.pair12.transpose() * &scaled;

    let mut hess = pair23.clone() * (m - 2.0) - cross * (m - 1.0);
    for z in 0..n {
        hess[(z, z)] += i1[z];
    }
    hess *= (m - 1.0) / eta;
    let hess = (&hess + hess.transpose()) * 0.5;

    let mixed = (0..n)
        .map(|w| {
            let transported: f64 = (0..n).map(|z| mom.pair12[(z, w)] * mom.cond_d_eps[z]).sum();
            (m - 1.0) / eta * (transported - weighted[w])
        })
        .collect();

    let log_rho_bar = rho.iter().zip(&mom.log_partition).map(|(r, l)| r.ln() - l).collect();

    Ok(DualDerivatives {
        objective: objective_from(params, phi, &mom.log_partition),
        grad,
        hess,
        mixed,
        aux: GibbsAux {
            log_rho_bar,
            i1,
            scaled_i2: pair23,
            pair12: mom.pair12,
            cond_d_eps: mom.cond_d_eps,
            weighted_d_eps: weighted,
        },
    })
}

/// `F(phi + t dir) - F(phi)` computed without subtracting two nearly equal
/// objective values. `log_partition` must be `L_z(phi)` (see
/// [`FirstOrder::log_partition`]).
pub fn objective_increment(
    params: &ProblemParams,
    phi: &[f64],
    log_partition: &[f64],
    dir: &[f64],
    t: f64,
    eps: f64,
) -> Result<f64> {
    params.check_inputs(phi, eps)?;
    let e = Enumerator::new(&params.bundle, params.rho.weights(), params.marginals, params.eta, phi, eps);
    let inc = e.log_partition_increment(log_partition, dir, t);
    let rho = params.weights();
    let m1 = (params.marginals - 1) as f64;
    let linear: f64 = dir.iter().zip(rho).map(|(d, r)| d * r).sum();
    let lse: f64 = inc.iter().zip(rho).map(|(l, r)| l * r).sum();
    Ok(-m1 * t * linear + params.eta * lse)
}

/// `psi_z = -eta L_z(phi)`: the first-coordinate potential that is optimal
/// for a given `phi`.
pub fn psi_from_phi(params: &ProblemParams, phi: &[f64], eps: f64) -> Result<Vec<f64>> {
    let mom = params.moments(phi, eps, Order::First)?;
    Ok(mom.log_partition.iter().map(|l| -params.eta * l).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::{build_cost_matrix, CostKind, Grid};

    fn two_point_instance() -> ProblemParams {
        let grid = Grid::from_points_1d(&[0.0, 1.0]).unwrap();
        let bundle = CostBundle::from_matrix(2, vec![0.0, 1.0, 1.0, 0.0], 3).unwrap();
        ProblemParams::new(1.0, DiscreteMarginal::uniform(grid), bundle, 0).unwrap()
    }

    #[test]
    fn zero_cost_zero_potential() {
        let grid = Grid::uniform_1d(4, 0.0, 1.0).unwrap();
        let bundle = CostBundle::from_matrix(4, vec![0.0; 16], 3).unwrap();
        let p = ProblemParams::new(0.3, DiscreteMarginal::uniform(grid), bundle, 0).unwrap();
        let d = derivatives(&p, &[0.0; 4], 0.4).unwrap();
        assert!(d.objective.abs() < 1e-15);
        assert!(d.grad.iter().all(|g| g.abs() < 1e-15));
        assert!(d.mixed.iter().all(|g| g.abs() < 1e-15));
    }

    #[test]
    fn two_point_objective_by_enumeration() {
        // All 8 tuples of {0,1}^3 with c_0(z, q, r) = W[z][q] + W[z][r].
        let p = two_point_instance();
        let w: [[f64; 2]; 2] = [[0.0, 1.0], [1.0, 0.0]];
        let mut expected = 0.0;
        for z in 0..2 {
            let mut s = 0.0;
            for q in 0..2 {
                for r in 0..2 {
                    s += (-(w[z][q] + w[z][r])).exp() / 4.0;
                }
            }
            expected += 0.5 * s.ln();
        }
        let value = objective(&p, &[0.0, 0.0], 0.0).unwrap();
        assert!((value - expected).abs() < 1e-14, "{value} vs {expected}");
        // shift invariance on an unanchored copy
        let shifted = objective(&p, &[0.7, 0.7], 0.0).unwrap();
        assert!((shifted - value).abs() < 1e-14);
    }

    #[test]
    fn increment_matches_difference() {
        for m in [3, 4] {
            let grid = Grid::uniform_1d(5, 0.0, 1.0).unwrap();
            let bundle = build_cost_matrix(&grid, CostKind::Log { offset: 0.1 }, m).unwrap();
            let p = ProblemParams::new(0.4, DiscreteMarginal::uniform(grid), bundle, 0).unwrap();
            let phi = [0.0, 0.3, -0.2, 0.1, 0.4];
            let dir = [0.0, -0.5, 0.25, 1.0, -0.75];
            let fo = first_order(&p, &phi, 0.6).unwrap();
            for t in [1e-3, 0.1, 1.0] {
                let moved: Vec<f64> = phi.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
                let direct = objective(&p, &moved, 0.6).unwrap() - fo.objective;
                let inc = objective_increment(&p, &phi, &fo.log_partition, &dir, t, 0.6).unwrap();
                assert!((direct - inc).abs() < 1e-13, "m={m} t={t}: {direct} vs {inc}");
            }
        }
    }

    #[test]
    fn size_guard_trips() {
        let grid = Grid::uniform_1d(10, 0.0, 1.0).unwrap();
        let bundle = build_cost_matrix(&grid, CostKind::Log { offset: 0.1 }, 5).unwrap();
        let p = ProblemParams::new(0.5, DiscreteMarginal::uniform(grid), bundle, 0)
            .unwrap()
            .with_budget(1000);
        assert!(matches!(objective(&p, &[0.0; 10], 0.5), Err(Error::SizeGuard { required: 10_000, .. })));
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = two_point_instance();
        assert!(objective(&p, &[0.0], 0.5).is_err());
        assert!(objective(&p, &[0.0, 0.0], 1.5).is_err());
        let grid = Grid::from_points_1d(&[0.0, 1.0]).unwrap();
        let b2 = CostBundle::from_matrix(2, vec![0.0; 4], 2).unwrap();
        assert!(ProblemParams::new(1.0, DiscreteMarginal::uniform(grid.clone()), b2, 0).is_err());
        let b3 = CostBundle::from_matrix(2, vec![0.0; 4], 3).unwrap();
        assert!(ProblemParams::new(0.0, DiscreteMarginal::uniform(grid.clone()), b3.clone(), 0).is_err());
        assert!(ProblemParams::new(1.0, DiscreteMarginal::uniform(grid), b3, 2).is_err());
    }

    #[test]
    fn aux_terms_are_consistent() {
        let grid = Grid::uniform_1d(5, 0.0, 1.0).unwrap();
        let bundle = build_cost_matrix(&grid, CostKind::Log { offset: 0.1 }, 3).unwrap();
        let p = ProblemParams::new(0.5, DiscreteMarginal::uniform(grid), bundle, 0).unwrap();
        let phi = [0.0, 0.2, -0.1, 0.3, 0.05];
        let d = derivatives(&p, &phi, 0.3).unwrap();
        let rho = p.weights();
        // rho_bar_y = rho_y / S_y and I3^y sums to 1 over z
        for y in 0..5 {
            let s: f64 = d.aux.i3(y, rho).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        let total: f64 = d.aux.i1.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let psi = psi_from_phi(&p, &phi, 0.3).unwrap();
        for y in 0..5 {
            assert!((d.aux.log_rho_bar[y] - (rho[y].ln() + psi[y] / p.eta())).abs() < 1e-12);
        }
    }
}
