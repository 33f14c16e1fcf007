//! Independent dense reference implementations used by the integration tests.
#![allow(dead_code)]

use mmotflow_core::euler_chain::{EulerProblem, PotentialStack};
use rand::Rng;

/// All tuples in `0..n` of length `m`, first coordinate slowest.
pub fn tuples(n: usize, m: usize) -> Vec<Vec<usize>> {
    let total = n.pow(m as u32);
    (0..total)
        .map(|mut k| {
            let mut t = vec![0; m];
            for slot in (0..m).rev() {
                t[slot] = k % n;
                k /= n;
            }
            t
        })
        .collect()
}

/// Symmetric problem data held as plain vectors.
pub struct Dense {
    pub n: usize,
    pub m: usize,
    pub eta: f64,
    pub rho: Vec<f64>,
    pub w: Vec<f64>,
}

impl Dense {
    pub fn cost(&self, x: &[usize], eps: f64) -> f64 {
        let mut star = 0.0;
        let mut inner = 0.0;
        for i in 1..self.m {
            star += self.w[x[0] * self.n + x[i]];
            for j in i + 1..self.m {
                inner += self.w[x[i] * self.n + x[j]];
            }
        }
        star + eps * inner
    }

    fn exponents(&self, phi: &[f64], eps: f64) -> Vec<(Vec<usize>, f64)> {
        tuples(self.n, self.m)
            .into_iter()
            .map(|x| {
                let mut a = -self.cost(&x, eps) / self.eta;
                for &xi in &x[1..] {
                    a += phi[xi] / self.eta + self.rho[xi].ln();
                }
                (x, a)
            })
            .collect()
    }

    fn log_partitions(&self, ex: &[(Vec<usize>, f64)]) -> Vec<f64> {
        let mut sums = vec![0.0; self.n];
        for (x, a) in ex {
            sums[x[0]] += a.exp();
        }
        sums.iter().map(|s| s.ln()).collect()
    }

    /// Reduced dual objective with `psi` eliminated.
    pub fn objective(&self, phi: &[f64], eps: f64) -> f64 {
        let ex = self.exponents(phi, eps);
        let lz = self.log_partitions(&ex);
        let linear: f64 = phi.iter().zip(&self.rho).map(|(p, r)| p * r).sum();
        let m1 = (self.m - 1) as f64;
        -m1 * linear + self.eta * lz.iter().zip(&self.rho).map(|(l, r)| l * r).sum::<f64>()
    }

    /// Full plan whose first marginal is exactly `rho`.
    pub fn plan(&self, phi: &[f64], eps: f64) -> Vec<f64> {
        let ex = self.exponents(phi, eps);
        let lz = self.log_partitions(&ex);
        ex.iter().map(|(x, a)| self.rho[x[0]] * (a - lz[x[0]]).exp()).collect()
    }

    pub fn marginal(&self, plan: &[f64], axis: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (x, g) in tuples(self.n, self.m).iter().zip(plan) {
            out[x[axis]] += g;
        }
        out
    }

    pub fn primal(&self, plan: &[f64], eps: f64) -> f64 {
        let h = |t: f64| if t > 0.0 { t * (t.ln() - 1.0) } else { 0.0 };
        tuples(self.n, self.m)
            .iter()
            .zip(plan)
            .map(|(x, &g)| {
                let r: f64 = x.iter().map(|&i| self.rho[i]).product();
                self.cost(x, eps) * g + self.eta * (h(g) - h(r))
            })
            .sum()
    }
}

pub fn random_symmetric_w(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = rng.gen_range(-1.0..1.0);
            w[i * n + j] = v;
            w[j * n + i] = v;
        }
    }
    w
}

pub fn random_simplex(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

/// Central difference gradient of `f`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut p = x.to_vec();
            let mut q = x.to_vec();
            p[i] += h;
            q[i] -= h;
            (f(&p) - f(&q)) / (2.0 * h)
        })
        .collect()
}

/// Brute-force Gibbs sums of the chain problem.
pub struct ChainBrute {
    pub mass: f64,
    pub one: Vec<Vec<f64>>,
    pub d_eps: Vec<Vec<f64>>,
    /// `pairs[i][j]` as row-major `n x n`, `i` on rows.
    pub pairs: Vec<Vec<Vec<f64>>>,
}

pub fn chain_brute(p: &EulerProblem, s: &PotentialStack, eps: f64) -> ChainBrute {
    let n = p.n();
    let m = p.marginals();
    let grid = p.marginal().grid();
    let rho = p.rho();
    let k = p.kinetic_scale();
    let f = p.final_map();
    let sq = |a: usize, b: usize| (grid.coord(a) - grid.coord(b)).powi(2);
    let mut out = ChainBrute {
        mass: 0.0,
        one: vec![vec![0.0; n]; m],
        d_eps: vec![vec![0.0; n]; m],
        pairs: vec![vec![vec![0.0; n * n]; m]; m],
    };
    for x in tuples(n, m) {
        let inner: f64 = (1..m - 1).map(|i| sq(x[i], x[i + 1])).sum::<f64>() * k;
        let c = k * sq(x[0], x[1]) + eps * inner + p.beta() * sq(f[x[0]], x[m - 1]);
        let phi: f64 = (0..m).map(|i| s.block(i)[x[i]]).sum();
        let weight: f64 = x.iter().map(|&i| rho[i]).product();
        let g = ((phi - c) / p.eta()).exp() * weight;
        out.mass += g;
        for i in 0..m {
            out.one[i][x[i]] += g;
            out.d_eps[i][x[i]] += g * inner;
            for j in 0..m {
                out.pairs[i][j][x[i] * n + x[j]] += g;
            }
        }
    }
    out
}
