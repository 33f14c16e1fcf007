//! Relaxed incompressible Euler problem as a multi-marginal transport problem
//! with a chain cost closed by a penalty edge:
//!
//! `c_eps(x) = k |x2 - x1|^2 + eps k sum_{i=2}^{m-1} |x(i+1) - x(i)|^2 + beta |F(x1) - xm|^2`
//!
//! with `k = m^2 / (2 T^2)`. The cost is not symmetric in its arguments, so
//! every marginal carries its own potential. All Gibbs sums are obtained by
//! conditioning on `x1` and passing log-domain messages along `x2 .. xm`, which
//! avoids enumerating the `N^m` tuples.
//!
//! The dual objective minimized here is
//! `-sum_i <phi_i, rho> + eta sum_x exp((sum_i phi_i(x_i) - c_eps(x)) / eta) prod rho(x_i)`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::costs::DiscreteMarginal;
use crate::error::{Error, Result};
use crate::linalg::{kept_indices, solve_reduced_spd, sup_norm};
use crate::logsum::log_sum_exp;
use crate::ode::{integrate_fixed, step_count, Scheme};
use crate::two_marginal::{sinkhorn_two_marginal, SinkhornOptions};

/// Largest `m * N` for which the dense Hessian is assembled.
pub const HESSIAN_DIM_LIMIT: usize = 20_000;

/// Final map `F` of the penalty edge, as a map on grid indices.
#[derive(Debug, Clone, PartialEq)]
pub enum FinalMap {
    /// `i -> N - 1 - i`, which is `x -> 1 - x` on a grid symmetric about 1/2.
    Reflect,
    /// `i -> (i + N/2) mod N`, which is `x -> (x + 1/2) mod 1` on a uniform
    /// periodic grid. Requires even `N`.
    ShiftMod,
    Explicit(Vec<usize>),
}

impl FinalMap {
    pub fn indices(&self, n: usize) -> Result<Vec<usize>> {
        let map: Vec<usize> = match self {
            FinalMap::Reflect => (0..n).map(|i| n - 1 - i).collect(),
            FinalMap::ShiftMod => {
                if !n.is_multiple_of(2) {
                    return Err(Error::InvalidInput(format!("shift_mod needs an even grid size, got {n}")));
                }
                (0..n).map(|i| (i + n / 2) % n).collect()
            }
            FinalMap::Explicit(v) => v.clone(),
        };
        if map.len() != n {
            return Err(Error::InvalidInput(format!("final map has {} entries, expected {n}", map.len())));
        }
        if let Some(&bad) = map.iter().find(|&&j| j >= n) {
            return Err(Error::InvalidInput(format!("final map entry {bad} out of range")));
        }
        Ok(map)
    }
}

impl std::str::FromStr for FinalMap {
    type Err = Error;

    /// `reflect`, `shift_mod`, or a comma-separated index list.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "reflect" => Ok(FinalMap::Reflect),
            "shift_mod" => Ok(FinalMap::ShiftMod),
            list => list
                .split(',')
                .map(|t| t.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map(FinalMap::Explicit)
                .map_err(|_| Error::InvalidInput(format!("unknown final map '{s}'"))),
        }
    }
}

/// Problem data for the chain cost.
#[derive(Debug, Clone)]
pub struct EulerProblem {
    marginal: DiscreteMarginal,
    m: usize,
    kinetic: f64,
    beta: f64,
    final_map: Vec<usize>,
    eta: f64,
    anchor: usize,
    dist: Vec<f64>,
    log_rho: Vec<f64>,
}

impl EulerProblem {
    /// Final time 1 and anchor 0 by default.
    pub fn new(marginal: DiscreteMarginal, m: usize, beta: f64, map: &FinalMap, eta: f64) -> Result<Self> {
        let n = marginal.len();
        if m < 3 {
            return Err(Error::InvalidInput(format!("need at least 3 marginals, got {m}")));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::InvalidInput(format!("penalty weight must be non-negative, got {beta}")));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidInput(format!("eta must be positive, got {eta}")));
        }
        if m * n > HESSIAN_DIM_LIMIT {
            return Err(Error::SizeGuard {
                required: (m * n) as u128,
                budget: HESSIAN_DIM_LIMIT as u128,
            });
        }
        let final_map = map.indices(n)?;
        let grid = marginal.grid();
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                dist[i * n + j] = grid.squared_distance(i, j);
            }
        }
        let log_rho = marginal.weights().iter().map(|r| r.ln()).collect();
        Ok(Self {
            marginal,
            m,
            kinetic: (m * m) as f64 / 2.0,
            beta,
            final_map,
            eta,
            anchor: 0,
            dist,
            log_rho,
        })
    }

    /// Sets `k = m^2 / (2 T^2)`.
    pub fn with_final_time(mut self, t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidInput(format!("final time must be positive, got {t}")));
        }
        self.kinetic = (self.m * self.m) as f64 / (2.0 * t * t);
        Ok(self)
    }

    /// Overrides the kinetic scale `k` directly; zero removes all kinetic terms.
    pub fn with_kinetic_scale(mut self, k: f64) -> Result<Self> {
        if !(k >= 0.0 && k.is_finite()) {
            return Err(Error::InvalidInput(format!("kinetic scale must be non-negative, got {k}")));
        }
        self.kinetic = k;
        Ok(self)
    }

    pub fn with_anchor(mut self, anchor: usize) -> Result<Self> {
        if anchor >= self.n() {
            return Err(Error::InvalidInput(format!("anchor {anchor} out of range")));
        }
        self.anchor = anchor;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.marginal.len()
    }

    pub fn marginals(&self) -> usize {
        self.m
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn kinetic_scale(&self) -> f64 {
        self.kinetic
    }

    pub fn anchor(&self) -> usize {
        self.anchor
    }

    pub fn final_map(&self) -> &[usize] {
        &self.final_map
    }

    pub fn marginal(&self) -> &DiscreteMarginal {
        &self.marginal
    }

    pub fn rho(&self) -> &[f64] {
        self.marginal.weights()
    }

    /// Squared grid distance.
    pub fn sq_dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n() + j]
    }

    /// Full cost of one tuple and its `eps` derivative.
    pub fn cost(&self, x: &[usize], eps: f64) -> (f64, f64) {
        let m = self.m;
        let inner: f64 = (1..m - 1).map(|i| self.sq_dist(x[i], x[i + 1])).sum();
        let d_eps = self.kinetic * inner;
        let c = self.kinetic * self.sq_dist(x[0], x[1]) + eps * d_eps + self.beta * self.sq_dist(self.final_map[x[0]], x[m - 1]);
        (c, d_eps)
    }

    /// Flat indices fixed to zero by the gauge: `phi_i[anchor]` for `i >= 2`.
    pub fn gauge_indices(&self) -> Vec<usize> {
        (1..self.m).map(|i| i * self.n() + self.anchor).collect()
    }
}

/// The `m` potentials of the chain problem, stored block by block.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialStack {
    n: usize,
    m: usize,
    anchor: usize,
    values: Vec<f64>,
}

impl PotentialStack {
    pub fn zeros(n: usize, m: usize, anchor: usize) -> Self {
        Self {
            n,
            m,
            anchor,
            values: vec![0.0; n * m],
        }
    }

    /// Moves the anchored values of blocks `2..m` into the first block, which
    /// leaves the Gibbs measure unchanged.
    pub fn from_flat(values: Vec<f64>, n: usize, m: usize, anchor: usize) -> Result<Self> {
        if values.len() != n * m || anchor >= n {
            return Err(Error::InvalidInput("potential stack has the wrong shape".into()));
        }
        let mut s = Self { n, m, anchor, values };
        s.normalize();
        Ok(s)
    }

    fn normalize(&mut self) {
        let n = self.n;
        for i in 1..self.m {
            let c = self.values[i * n + self.anchor];
            if c != 0.0 {
                self.values[i * n..(i + 1) * n].iter_mut().for_each(|v| *v -= c);
                self.values[..n].iter_mut().for_each(|v| *v += c);
            }
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn marginals(&self) -> usize {
        self.m
    }

    pub fn anchor(&self) -> usize {
        self.anchor
    }

    /// Potential of marginal `i` (0-based).
    pub fn block(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn flat(&self) -> &[f64] {
        &self.values
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.values)
    }
}

/// Gibbs sums of the chain measure at one potential.
#[derive(Debug, Clone)]
pub struct ChainContraction {
    m: usize,
    /// Total mass of the Gibbs measure.
    pub mass: f64,
    /// One-fold marginals, `m` blocks of length `N`.
    pub one: Vec<Vec<f64>>,
    /// `sum gamma * d_eps c` restricted to `x_i = x`, per block.
    pub d_eps: Vec<Vec<f64>>,
    pairs: Vec<Option<DMatrix<f64>>>,
}

impl ChainContraction {
    /// Two-fold marginal on marginals `(i, j)`, `i` on rows. `None` when pairs
    /// were not requested or `i == j`.
    pub fn pair(&self, i: usize, j: usize) -> Option<DMatrix<f64>> {
        if i < j {
            self.pairs[i * self.m + j].clone()
        } else if j < i {
            self.pairs[j * self.m + i].as_ref().map(|p| p.transpose())
        } else {
            None
        }
    }
}

// Messages for one value of x1.
struct Conditioned {
    log_mass: f64,
    // node marginals and eps-weighted sums for nodes 1..m (index 0 unused)
    node: Vec<Vec<f64>>,
    node_d: Vec<Vec<f64>>,
    // lu0 + u_i + alpha_i and u_j + beta_j, used by the pair sums
    left: Vec<Vec<f64>>,
    right: Vec<Vec<f64>>,
    d_total: f64,
}

fn lse_into(buf: &mut [f64]) -> (f64, f64) {
    let max = buf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return (max, 0.0);
    }
    let mut sum = 0.0;
    for v in buf.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    (max + sum.ln(), sum)
}

/// Log-domain contraction of the chain measure. With `pairs`, also returns
/// every two-fold marginal at `O(m^2 N^3)` cost.
pub fn chain_contract(problem: &EulerProblem, stack: &PotentialStack, eps: f64, pairs: bool) -> Result<ChainContraction> {
    let n = problem.n();
    let m = problem.m;
    if stack.n != n || stack.m != m {
        return Err(Error::InvalidInput("potential stack does not match the problem".into()));
    }
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidInput(format!("epsilon {eps} outside [0, 1]")));
    }
    let eta = problem.eta;
    let k = problem.kinetic;
    let lr = &problem.log_rho;
    // a-independent unaries u_i(x) = phi_i(x)/eta + log rho(x)
    let base: Vec<Vec<f64>> = (0..m)
        .map(|i| stack.block(i).iter().zip(lr).map(|(p, l)| p / eta + l).collect())
        .collect();
    let log_k: Vec<f64> = problem.dist.iter().map(|d| -eps * k * d / eta).collect();

    let per_a: Vec<Conditioned> = (0..n)
        .into_par_iter()
        .map(|a| {
            let lu0 = base[0][a];
            let mut u = base.clone();
            for x in 0..n {
                u[1][x] -= k * problem.sq_dist(a, x) / eta;
                u[m - 1][x] -= problem.beta * problem.sq_dist(problem.final_map[a], x) / eta;
            }
            let mut alpha = vec![vec![0.0; n]; m];
            let mut fa = vec![vec![0.0; n]; m];
            let mut beta = vec![vec![0.0; n]; m];
            let mut fb = vec![vec![0.0; n]; m];
            let mut buf = vec![0.0; n];
            for i in 1..m - 1 {
                for y in 0..n {
                    for x in 0..n {
                        buf[x] = alpha[i][x] + u[i][x] + log_k[x * n + y];
                    }
                    let (l, s) = lse_into(&mut buf);
                    alpha[i + 1][y] = l;
                    fa[i + 1][y] = (0..n).map(|x| buf[x] * (fa[i][x] + k * problem.dist[x * n + y])).sum::<f64>() / s;
                }
            }
            for i in (1..m - 1).rev() {
                for x in 0..n {
                    for y in 0..n {
                        buf[y] = log_k[x * n + y] + u[i + 1][y] + beta[i + 1][y];
                    }
                    let (l, s) = lse_into(&mut buf);
                    beta[i][x] = l;
                    fb[i][x] = (0..n).map(|y| buf[y] * (fb[i + 1][y] + k * problem.dist[x * n + y])).sum::<f64>() / s;
                }
            }
            let mut node = vec![Vec::new(); m];
            let mut node_d = vec![Vec::new(); m];
            let mut left = vec![Vec::new(); m];
            let mut right = vec![Vec::new(); m];
            for i in 1..m {
                left[i] = (0..n).map(|x| lu0 + u[i][x] + alpha[i][x]).collect();
                right[i] = (0..n).map(|x| u[i][x] + beta[i][x]).collect();
                node[i] = (0..n).map(|x| (left[i][x] + beta[i][x]).exp()).collect();
                node_d[i] = (0..n).map(|x| node[i][x] * (fa[i][x] + fb[i][x])).collect();
            }
            let lz: Vec<f64> = (0..n).map(|x| left[1][x] + beta[1][x]).collect();
            let log_mass = log_sum_exp(&lz);
            let d_total = node_d[1].iter().sum();
            Conditioned {
                log_mass,
                node,
                node_d,
                left,
                right,
                d_total,
            }
        })
        .collect();

    let mut one = vec![vec![0.0; n]; m];
    let mut d_eps = vec![vec![0.0; n]; m];
    for (a, c) in per_a.iter().enumerate() {
        one[0][a] = c.log_mass.exp();
        d_eps[0][a] = c.d_total;
        for i in 1..m {
            for x in 0..n {
                one[i][x] += c.node[i][x];
                d_eps[i][x] += c.node_d[i][x];
            }
        }
    }
    let mass = one[0].iter().sum();

    let mut pair_store = vec![None; m * m];
    if pairs {
        for j in 1..m {
            pair_store[j] = Some(DMatrix::from_fn(n, n, |a, y| per_a[a].node[j][y]));
        }
        // transfer[i][j](x, y): log-sum over paths from node i at x to node j
        // at y, including the unaries strictly between them, none of which
        // depends on x1.
        let jobs: Vec<(usize, usize)> = (1..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
        let transfers: Vec<Vec<Vec<f64>>> = (1..m - 1)
            .into_par_iter()
            .map(|i| {
                let mut out = vec![log_k.clone()];
                let mut buf = vec![0.0; n];
                for j in i + 1..m - 1 {
                    let prev = out.last().unwrap();
                    let mut next = vec![0.0; n * n];
                    for x in 0..n {
                        for z in 0..n {
                            for y in 0..n {
                                buf[y] = prev[x * n + y] + base[j][y] + log_k[y * n + z];
                            }
                            next[x * n + z] = log_sum_exp(&buf);
                        }
                    }
                    out.push(next);
                }
                out
            })
            .collect();
        let mats: Vec<DMatrix<f64>> = jobs
            .par_iter()
            .map(|&(i, j)| {
                let t = &transfers[i - 1][j - i - 1];
                let mut buf = vec![0.0; n];
                DMatrix::from_fn(n, n, |x, y| {
                    for (a, c) in per_a.iter().enumerate() {
                        buf[a] = c.left[i][x] + c.right[j][y];
                    }
                    (log_sum_exp(&buf) + t[x * n + y]).exp()
                })
            })
            .collect();
        for (&(i, j), mat) in jobs.iter().zip(mats) {
            pair_store[i * m + j] = Some(mat);
        }
    }

    Ok(ChainContraction {
        m,
        mass,
        one,
        d_eps,
        pairs: pair_store,
    })
}

/// Objective and derivatives of the chain dual at one point, over the flat
/// `m N` coordinates.
#[derive(Debug, Clone)]
pub struct ChainDerivatives {
    pub objective: f64,
    pub grad: Vec<f64>,
    /// `(1/eta) [delta_ij diag(gamma_i) + (1 - delta_ij) gamma_ij]`.
    pub hess: DMatrix<f64>,
    /// `d_eps grad = -(1/eta) sum gamma d_eps c` per block.
    pub mixed: Vec<f64>,
}

pub fn chain_objective(problem: &EulerProblem, stack: &PotentialStack, c: &ChainContraction) -> f64 {
    let rho = problem.rho();
    let linear: f64 = (0..problem.m)
        .map(|i| stack.block(i).iter().zip(rho).map(|(p, r)| p * r).sum::<f64>())
        .sum();
    problem.eta * c.mass - linear
}

pub fn chain_derivatives(problem: &EulerProblem, stack: &PotentialStack, eps: f64) -> Result<ChainDerivatives> {
    let n = problem.n();
    let m = problem.m;
    let eta = problem.eta;
    let c = chain_contract(problem, stack, eps, true)?;
    let rho = problem.rho();
    let mut grad = Vec::with_capacity(n * m);
    let mut mixed = Vec::with_capacity(n * m);
    for i in 0..m {
        grad.extend(c.one[i].iter().zip(rho).map(|(g, r)| g - r));
        mixed.extend(c.d_eps[i].iter().map(|d| -d / eta));
    }
    let mut hess = DMatrix::zeros(n * m, n * m);
    for i in 0..m {
        for x in 0..n {
            hess[(i * n + x, i * n + x)] = c.one[i][x] / eta;
        }
        for j in i + 1..m {
            let p = c.pair(i, j).expect("pairs requested");
            for x in 0..n {
                for y in 0..n {
                    let v = p[(x, y)] / eta;
                    hess[(i * n + x, j * n + y)] = v;
                    hess[(j * n + y, i * n + x)] = v;
                }
            }
        }
    }
    Ok(ChainDerivatives {
        objective: chain_objective(problem, stack, &c),
        grad,
        hess,
        mixed,
    })
}

/// Options for [`chain_sinkhorn`].
#[derive(Debug, Clone, Copy)]
pub struct ChainSinkhornOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ChainSinkhornOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChainSinkhornReport {
    /// Full sweeps over the `m` blocks.
    pub sweeps: usize,
    /// Largest one-marginal error before the last sweep.
    pub residual: f64,
}

fn marginal_residual(c: &ChainContraction, rho: &[f64]) -> f64 {
    c.one
        .iter()
        .flat_map(|g| g.iter().zip(rho).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max)
}

/// Block-coordinate Sinkhorn on the `m` potentials:
/// `phi_i <- phi_i - eta log(gamma_i / rho)`, cycling over blocks.
pub fn chain_sinkhorn(
    problem: &EulerProblem,
    eps: f64,
    init: Option<&PotentialStack>,
    opts: ChainSinkhornOptions,
) -> Result<(PotentialStack, ChainSinkhornReport)> {
    let n = problem.n();
    let m = problem.m;
    let mut stack = match init {
        Some(s) => s.clone(),
        None => PotentialStack::zeros(n, m, problem.anchor),
    };
    let rho = problem.rho();
    let eta = problem.eta;
    let mut sweeps = 0;
    loop {
        let c = chain_contract(problem, &stack, eps, false)?;
        let residual = marginal_residual(&c, rho);
        if residual <= opts.tol {
            stack.normalize();
            return Ok((stack, ChainSinkhornReport { sweeps, residual }));
        }
        if sweeps >= opts.max_iter {
            return Err(Error::MaxIterExceeded {
                iterations: sweeps,
                residual,
            });
        }
        for i in 0..m {
            let g = if i == 0 {
                c.one[0].clone()
            } else {
                chain_contract(problem, &stack, eps, false)?.one[i].clone()
            };
            for x in 0..n {
                stack.values[i * n + x] -= eta * (g[x] / rho[x]).ln();
            }
        }
        stack.normalize();
        sweeps += 1;
    }
}

/// Exact potentials at `eps = 0`, where only the edges `(1, 2)` and `(1, m)`
/// remain: two two-marginal solves, summed on the first marginal, with the
/// middle potentials at zero.
pub fn euler_initial(problem: &EulerProblem, tol: f64, max_iter: usize) -> Result<PotentialStack> {
    let n = problem.n();
    let m = problem.m;
    let rho = problem.rho();
    let opts = SinkhornOptions {
        tol,
        max_iter,
        anchor: problem.anchor,
    };
    let w12: Vec<f64> = problem.dist.iter().map(|d| problem.kinetic * d).collect();
    let w1m: Vec<f64> = (0..n * n)
        .map(|idx| problem.beta * problem.sq_dist(problem.final_map[idx / n], idx % n))
        .collect();
    let s12 = sinkhorn_two_marginal(rho, rho, &w12, problem.eta, opts)?;
    let s1m = sinkhorn_two_marginal(rho, rho, &w1m, problem.eta, opts)?;
    let mut values = vec![0.0; n * m];
    for x in 0..n {
        values[x] = s12.psi[x] + s1m.psi[x];
        values[n + x] = s12.phi[x];
        values[(m - 1) * n + x] = s1m.phi[x];
    }
    PotentialStack::from_flat(values, n, m, problem.anchor)
}

/// `-H^{-1} d_eps grad` on the anchored subspace.
pub fn chain_rhs(problem: &EulerProblem, stack: &PotentialStack, eps: f64) -> Result<Vec<f64>> {
    let d = chain_derivatives(problem, stack, eps)?;
    let keep = kept_indices(problem.n() * problem.m, &problem.gauge_indices());
    let neg: Vec<f64> = d.mixed.iter().map(|v| -v).collect();
    solve_reduced_spd(&d.hess, &neg, &keep).ok_or(Error::NotSpd { epsilon: eps })
}

/// Potentials along `eps = 0, h, .., 1`.
#[derive(Debug, Clone)]
pub struct EulerTrajectory {
    pub scheme: Scheme,
    pub h: f64,
    pub eps: Vec<f64>,
    pub stacks: Vec<PotentialStack>,
    /// Sup-norm gradient residual at each grid point.
    pub residuals: Vec<f64>,
    pub spd_solves: usize,
}

impl EulerTrajectory {
    pub fn endpoint(&self) -> &PotentialStack {
        self.stacks.last().expect("trajectory has at least the initial point")
    }
}

/// Integrates from `init` at `eps = 0` to `eps = 1`.
pub fn euler_ode_solve_from(problem: &EulerProblem, init: &PotentialStack, scheme: Scheme, h: f64) -> Result<EulerTrajectory> {
    let steps = step_count(h)?;
    let n = problem.n();
    let m = problem.m;
    if init.n != n || init.m != m {
        return Err(Error::InvalidInput("initial stack does not match the problem".into()));
    }
    let anchor = problem.anchor;
    let mut eps_list = Vec::with_capacity(steps + 1);
    let mut stacks = Vec::with_capacity(steps + 1);
    let mut residuals = Vec::with_capacity(steps + 1);
    let mut spd_solves = 0;
    let rho = problem.rho();
    integrate_fixed(
        &scheme.tableau(),
        init.flat().to_vec(),
        steps,
        |y, eps| {
            spd_solves += 1;
            let s = PotentialStack {
                n,
                m,
                anchor,
                values: y.to_vec(),
            };
            chain_rhs(problem, &s, eps)
        },
        |_, eps, y| {
            let s = PotentialStack {
                n,
                m,
                anchor,
                values: y.to_vec(),
            };
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("non-finite potential at epsilon = {eps}")));
            }
            let c = chain_contract(problem, &s, eps, false)?;
            residuals.push(marginal_residual(&c, rho));
            eps_list.push(eps);
            stacks.push(s);
            Ok(())
        },
    )?;
    Ok(EulerTrajectory {
        scheme,
        h,
        eps: eps_list,
        stacks,
        residuals,
        spd_solves,
    })
}

/// Exact `eps = 0` initialization (two-marginal tolerance `1e-12`) followed
/// by integration.
pub fn euler_ode_solve(problem: &EulerProblem, scheme: Scheme, h: f64) -> Result<EulerTrajectory> {
    let init = euler_initial(problem, 1e-12, 1_000_000)?;
    euler_ode_solve_from(problem, &init, scheme, h)
}

/// Shifts a potential to mean zero, removing the additive gauge.
pub fn centered(v: &[f64]) -> Vec<f64> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| x - mean).collect()
}
