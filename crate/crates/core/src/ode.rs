//! Continuation in `eps`: fixed-step explicit integration of
//!
//! ```text
//! dphi/deps = -[D^2 F(phi, eps)]^{-1} d/deps grad F(phi, eps),   phi(0) = phi_w
//! ```
//!
//! on the anchored subspace `phi[anchor] = 0`.

use std::cell::RefCell;
use std::fmt;
use std::str::FromStr;

use crate::dual::{derivatives, DualDerivatives, Potential, ProblemParams};
use crate::error::{Error, Result};
use crate::linalg::{kept_indices, min_eigenvalue_reduced, solve_reduced_spd, sup_norm};
use crate::tableau::ButcherTableau;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Euler,
    Rk3,
    Rk5,
    Rk8,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Euler, Scheme::Rk3, Scheme::Rk5, Scheme::Rk8];

    pub fn tableau(self) -> ButcherTableau {
        match self {
            Scheme::Euler => ButcherTableau::euler(),
            Scheme::Rk3 => ButcherTableau::kutta3(),
            Scheme::Rk5 => ButcherTableau::dormand_prince5(),
            Scheme::Rk8 => ButcherTableau::dormand_prince8(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Euler => "euler",
            Scheme::Rk3 => "rk3",
            Scheme::Rk5 => "rk5",
            Scheme::Rk8 => "rk8",
        }
    }

    pub fn order(self) -> usize {
        self.tableau().order
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name() == s.trim())
            .ok_or_else(|| Error::InvalidInput(format!("unknown scheme '{s}' (expected euler, rk3, rk5 or rk8)")))
    }
}

/// Number of steps `1/h`, which must be an integer.
pub fn step_count(h: f64) -> Result<usize> {
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::InvalidInput(format!("step size {h} outside (0, 1]")));
    }
    let steps = (1.0 / h).round();
    if (steps * h - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!("1/h = {} is not an integer", 1.0 / h)));
    }
    Ok(steps as usize)
}

/// Fixed-step explicit Runge-Kutta from `eps = 0` to `eps = 1`.
///
/// `f(y, eps)` is the vector field. `on_step(k, eps_k, y_k)` is called at every
/// grid point including both ends and may abort the integration.
pub fn integrate_fixed<F, G>(tableau: &ButcherTableau, y0: Vec<f64>, steps: usize, mut f: F, mut on_step: G) -> Result<Vec<f64>>
where
    F: FnMut(&[f64], f64) -> Result<Vec<f64>>,
    G: FnMut(usize, f64, &[f64]) -> Result<()>,
{
    let h = 1.0 / steps as f64;
    let dim = y0.len();
    let mut y = y0;
    let mut stage = vec![0.0; dim];
    let mut ks: Vec<Vec<f64>> = Vec::with_capacity(tableau.stages());
    for k in 0..steps {
        let eps = k as f64 / steps as f64;
        on_step(k, eps, &y)?;
        ks.clear();
        for i in 0..tableau.stages() {
            stage.copy_from_slice(&y);
            for (a, kj) in tableau.a[i].iter().zip(&ks) {
                if *a != 0.0 {
                    stage.iter_mut().zip(kj).for_each(|(s, v)| *s += h * a * v);
                }
            }
            ks.push(f(&stage, eps + tableau.c[i] * h)?);
        }
        for (b, kj) in tableau.b.iter().zip(&ks) {
            if *b != 0.0 {
                y.iter_mut().zip(kj).for_each(|(s, v)| *s += h * b * v);
            }
        }
    }
    on_step(steps, 1.0, &y)?;
    Ok(y)
}

/// Per-point diagnostics along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub eps: f64,
    /// `||grad F(phi_k, eps_k)||_inf`
    pub grad_norm: f64,
    /// Smallest eigenvalue of the anchored Hessian, when requested.
    pub min_eigenvalue: Option<f64>,
    pub phi_sup: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub scheme: Scheme,
    pub h: f64,
    pub eps: Vec<f64>,
    pub potentials: Vec<Potential>,
    pub diagnostics: Vec<StepDiagnostics>,
    /// Successful reduced SPD solves (one per stage).
    pub spd_solves: usize,
}

impl Trajectory {
    pub fn endpoint(&self) -> &Potential {
        self.potentials.last().expect("trajectory has at least two points")
    }

    /// Potential at the grid point closest to `eps`.
    pub fn at(&self, eps: f64) -> &Potential {
        let k = self
            .eps
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - eps).abs().total_cmp(&(b.1 - eps).abs()))
            .map(|(k, _)| k)
            .unwrap_or(0);
        &self.potentials[k]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IntegrateOptions {
    /// Compute the smallest anchored-Hessian eigenvalue at every grid point.
    pub eigen_diagnostics: bool,
    /// Allowed excess over `4M`, in units of `M`.
    pub bound_slack: f64,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            eigen_diagnostics: true,
            bound_slack: 0.1,
        }
    }
}

fn solve_direction(params: &ProblemParams, d: &DualDerivatives, eps: f64) -> Result<Vec<f64>> {
    let keep = kept_indices(params.n(), &[params.anchor()]);
    let b: Vec<f64> = d.mixed.iter().map(|v| -v).collect();
    solve_reduced_spd(&d.hess, &b, &keep).ok_or(Error::NotSpd { epsilon: eps })
}

/// The vector field: solves `H_red z = -mixed_red` and embeds with
/// `z[anchor] = 0`.
pub fn rhs(params: &ProblemParams, phi: &[f64], eps: f64) -> Result<Vec<f64>> {
    let d = derivatives(params, phi, eps)?;
    solve_direction(params, &d, eps)
}

/// Integrates from `phi0` (normally the two-marginal potential) to `eps = 1`.
pub fn integrate(
    params: &ProblemParams,
    phi0: &Potential,
    scheme: Scheme,
    h: f64,
    opts: IntegrateOptions,
) -> Result<Trajectory> {
    let steps = step_count(h)?;
    let n = params.n();
    if phi0.values().len() != n {
        return Err(Error::InvalidInput("initial potential has the wrong length".into()));
    }
    let anchor = params.anchor();
    let bound = params.potential_bound() + opts.bound_slack * params.bundle().sup_bound();
    let keep = kept_indices(n, &[anchor]);

    let mut eps_out = Vec::with_capacity(steps + 1);
    let mut potentials = Vec::with_capacity(steps + 1);
    let mut diagnostics = Vec::with_capacity(steps + 1);
    let mut spd_solves = 0usize;
    // Derivatives at the start of the current step, shared between the
    // diagnostics and the first stage.
    let cached: RefCell<Option<(f64, DualDerivatives)>> = RefCell::new(None);

    let y0 = Potential::anchored(phi0.values().to_vec(), anchor).into_values();
    let tableau = scheme.tableau();
    integrate_fixed(
        &tableau,
        y0,
        steps,
        |y, eps| {
            let d = match cached.borrow_mut().take() {
                Some((e, d)) if e == eps => d,
                _ => derivatives(params, y, eps)?,
            };
            let z = solve_direction(params, &d, eps)?;
            spd_solves += 1;
            Ok(z)
        },
        |_, eps, y| {
            let d = derivatives(params, y, eps)?;
            let phi_sup = sup_norm(y);
            if phi_sup > bound {
                return Err(Error::BoundViolation {
                    epsilon: eps,
                    sup: phi_sup,
                    bound,
                });
            }
            let min_eigenvalue = opts.eigen_diagnostics.then(|| min_eigenvalue_reduced(&d.hess, &keep));
            diagnostics.push(StepDiagnostics {
                eps,
                grad_norm: sup_norm(&d.grad),
                min_eigenvalue,
                phi_sup,
            });
            eps_out.push(eps);
            potentials.push(Potential::anchored(y.to_vec(), anchor));
            *cached.borrow_mut() = Some((eps, d));
            Ok(())
        },
    )?;

    Ok(Trajectory {
        scheme,
        h,
        eps: eps_out,
        potentials,
        diagnostics,
        spd_solves,
    })
}
