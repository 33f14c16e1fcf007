//! Stabilized enumeration of the Gibbs tensor of the symmetric problem.
//!
//! For a potential `phi` the (normalized per first coordinate) Gibbs plan is
//!
//! ```text
//! gamma(z, x2..xm) = rho_z * exp(a(z, x) - L_z),
//! a(z, x) = sum_i (phi_{xi}/eta + log rho_{xi}) - c_eps(z, x)/eta,
//! L_z = log sum_x exp(a(z, x)).
//! ```
//!
//! Every quantity needed by the dual derivatives is a moment of `gamma`, so
//! a single enumeration (two for second-order data) produces all of them.
//! `m = 3` has a dedicated O(N^3) path with the pair table cached.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::costs::CostBundle;
use crate::logsum::LogAccumulator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum Order {
    First,
    Second,
}

/// Moments of the Gibbs tensor.
#[derive(Debug, Clone)]
pub(crate) struct Moments {
    /// `L_z`.
    pub log_partition: Vec<f64>,
    /// `gamma_{1,2}(z, w)`, rows indexed by the first coordinate.
    pub pair12: DMatrix<f64>,
    /// `E[d_eps c | x1 = z]`.
    pub cond_d_eps: Vec<f64>,
    /// `gamma_{2,3}(w, v)`; only with [`Order::Second`].
    pub pair23: Option<DMatrix<f64>>,
    /// `sum gamma(x) d_eps c(x) [x2 = w]`; only with [`Order::Second`].
    pub weighted_d_eps: Option<Vec<f64>>,
}

pub(crate) struct Enumerator<'a> {
    bundle: &'a CostBundle,
    rho: &'a [f64],
    marginals: usize,
    eta: f64,
    eps: f64,
    /// `phi_x / eta + log rho_x`
    site: Vec<f64>,
}

impl<'a> Enumerator<'a> {
    pub fn new(bundle: &'a CostBundle, rho: &'a [f64], marginals: usize, eta: f64, phi: &[f64], eps: f64) -> Self {
        let site = phi.iter().zip(rho).map(|(p, r)| p / eta + r.ln()).collect();
        Self {
            bundle,
            rho,
            marginals,
            eta,
            eps,
            site,
        }
    }

    pub fn moments(&self, order: Order) -> Moments {
        if self.marginals == 3 {
            self.moments_three(order)
        } else {
            self.moments_general(order)
        }
    }

    fn n(&self) -> usize {
        self.rho.len()
    }

    /// `(phi_q + phi_r - eps W_qr)/eta + log rho_q + log rho_r`
    fn pair_table(&self) -> Vec<f64> {
        let n = self.n();
        let mut table = vec![0.0; n * n];
        for q in 0..n {
            for r in 0..n {
                table[q * n + r] = self.site[q] + self.site[r] - self.eps * self.bundle.w(q, r) / self.eta;
            }
        }
        table
    }

    fn moments_three(&self, order: Order) -> Moments {
        let n = self.n();
        let table = self.pair_table();
        let eta = self.eta;
        let bundle = self.bundle;

        struct Row {
            log_partition: f64,
            pair: Vec<f64>,
            cond: f64,
        }

        let rows: Vec<Row> = (0..n)
            .into_par_iter()
            .map(|z| {
                let star: Vec<f64> = (0..n).map(|q| -bundle.w(z, q) / eta).collect();
                let mut buf = vec![0.0; n * n];
                let mut max = f64::NEG_INFINITY;
                for q in 0..n {
                    for r in 0..n {
                        let a = table[q * n + r] + star[q] + star[r];
                        buf[q * n + r] = a;
                        max = max.max(a);
                    }
                }
                let mut total = 0.0;
                for v in buf.iter_mut() {
                    *v = (*v - max).exp();
                    total += *v;
                }
                let log_partition = max + total.ln();
                let scale = self.rho[z] / total;
                let mut pair = vec![0.0; n];
                let mut cond = 0.0;
                for q in 0..n {
                    let mut row_sum = 0.0;
                    for r in 0..n {
                        let g = buf[q * n + r] * scale;
                        row_sum += g;
                        cond += g * bundle.w(q, r);
                    }
                    pair[q] = row_sum;
                }
                Row {
                    log_partition,
                    pair,
                    cond: cond / self.rho[z],
                }
            })
            .collect();

        let log_partition: Vec<f64> = rows.iter().map(|r| r.log_partition).collect();
        let pair12 = DMatrix::from_fn(n, n, |z, w| rows[z].pair[w]);
        let cond_d_eps = rows.iter().map(|r| r.cond).collect();

        let (pair23, weighted_d_eps) = if order == Order::Second {
            let offset: Vec<f64> = (0..n).map(|z| self.rho[z].ln() - log_partition[z]).collect();
            let rows23: Vec<Vec<f64>> = (0..n)
                .into_par_iter()
                .map(|q| {
                    let mut row = vec![0.0; n];
                    for z in 0..n {
                        let base = offset[z] - bundle.w(z, q) / eta;
                        for r in 0..n {
                            row[r] += (table[q * n + r] + base - bundle.w(z, r) / eta).exp();
                        }
                    }
                    row
                })
                .collect();
            let pair23 = DMatrix::from_fn(n, n, |q, r| rows23[q][r]);
            let weighted = (0..n)
                .map(|q| (0..n).map(|r| rows23[q][r] * bundle.w(q, r)).sum())
                .collect();
            (Some(pair23), Some(weighted))
        } else {
            (None, None)
        };

        Moments {
            log_partition,
            pair12,
            cond_d_eps,
            pair23,
            weighted_d_eps,
        }
    }

    /// Log weight `a(z, x)` and `d_eps c` for one tuple `x = (x2..xm)`.
    fn tuple(&self, z: usize, rest: &[usize]) -> (f64, f64) {
        let mut a = 0.0;
        let mut star = 0.0;
        let mut inner = 0.0;
        for (k, &i) in rest.iter().enumerate() {
            a += self.site[i];
            star += self.bundle.w(z, i);
            for &j in &rest[k + 1..] {
                inner += self.bundle.w(i, j);
            }
        }
        (a - (star + self.eps * inner) / self.eta, inner)
    }

    fn moments_general(&self, order: Order) -> Moments {
        let n = self.n();
        let slots = self.marginals - 1;
        let second = order == Order::Second;

        struct Row {
            log_partition: f64,
            pair: Vec<f64>,
            cond: f64,
            pair23: Vec<f64>,
            weighted: Vec<f64>,
        }

        let rows: Vec<Row> = (0..n)
            .into_par_iter()
            .map(|z| {
                let mut acc = LogAccumulator::default();
                for_each_tuple(n, slots, |rest| acc.push(self.tuple(z, rest).0));
                let log_partition = acc.value();
                let log_rho = self.rho[z].ln();
                let mut pair = vec![0.0; n];
                let mut cond = 0.0;
                let mut pair23 = if second { vec![0.0; n * n] } else { Vec::new() };
                let mut weighted = if second { vec![0.0; n] } else { Vec::new() };
                for_each_tuple(n, slots, |rest| {
                    let (a, d) = self.tuple(z, rest);
                    let g = (log_rho + a - log_partition).exp();
                    pair[rest[0]] += g;
                    cond += g * d;
                    if second {
                        pair23[rest[0] * n + rest[1]] += g;
                        weighted[rest[0]] += g * d;
                    }
                });
                Row {
                    log_partition,
                    pair,
                    cond: cond / self.rho[z],
                    pair23,
                    weighted,
                }
            })
            .collect();

        let log_partition = rows.iter().map(|r| r.log_partition).collect();
        let pair12 = DMatrix::from_fn(n, n, |z, w| rows[z].pair[w]);
        let cond_d_eps = rows.iter().map(|r| r.cond).collect();
        let (pair23, weighted_d_eps) = if second {
            let mut p = DMatrix::zeros(n, n);
            let mut wd = vec![0.0; n];
            for row in &rows {
                for q in 0..n {
                    for r in 0..n {
                        p[(q, r)] += row.pair23[q * n + r];
                    }
                    wd[q] += row.weighted[q];
                }
            }
            (Some(p), Some(wd))
        } else {
            (None, None)
        };
        Moments {
            log_partition,
            pair12,
            cond_d_eps,
            pair23,
            weighted_d_eps,
        }
    }
}

impl Enumerator<'_> {
    /// `L_z(phi + t dir) - L_z(phi)` for every `z`, evaluated as
    /// `log1p(E_z[expm1(t sum_i dir_{xi} / eta)])` under the Gibbs conditional
    /// at `phi`, so that tiny increments keep their relative accuracy.
    /// `log_partition` must be `L_z(phi)`.
    pub fn log_partition_increment(&self, log_partition: &[f64], dir: &[f64], t: f64) -> Vec<f64> {
        let n = self.n();
        let slots = self.marginals - 1;
        let scaled: Vec<f64> = dir.iter().map(|d| t * d / self.eta).collect();
        if self.marginals == 3 {
            let table = self.pair_table();
            return (0..n)
                .into_par_iter()
                .map(|z| {
                    let star: Vec<f64> = (0..n).map(|q| -self.bundle.w(z, q) / self.eta).collect();
                    let mut acc = 0.0;
                    for q in 0..n {
                        for r in 0..n {
                            let p = (table[q * n + r] + star[q] + star[r] - log_partition[z]).exp();
                            acc += p * (scaled[q] + scaled[r]).exp_m1();
                        }
                    }
                    acc.ln_1p()
                })
                .collect();
        }
        (0..n)
            .into_par_iter()
            .map(|z| {
                let mut acc = 0.0;
                for_each_tuple(n, slots, |rest| {
                    let p = (self.tuple(z, rest).0 - log_partition[z]).exp();
                    let u: f64 = rest.iter().map(|&i| scaled[i]).sum();
                    acc += p * u.exp_m1();
                });
                acc.ln_1p()
            })
            .collect()
    }
}

/// Calls `f` on every tuple of `slots` indices in `0..n`, last index fastest.
pub(crate) fn for_each_tuple(n: usize, slots: usize, mut f: impl FnMut(&[usize])) {
    let mut idx = vec![0usize; slots];
    loop {
        f(&idx);
        let mut k = slots;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
        }
    }
}
