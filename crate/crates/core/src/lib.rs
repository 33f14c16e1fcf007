//! Discrete multi-marginal entropic optimal transport with pairwise costs,
//! solved by continuation in the interpolation parameter `epsilon`.
//!
//! At `epsilon = 0` the cost only couples the first marginal to each of the
//! others, and the problem splits into independent two-marginal problems
//! ([`two_marginal`]). The optimal potential is then transported to
//! `epsilon = 1` by integrating the implicit-function ODE
//! `dphi/deps = -H^{-1} d_eps grad` ([`ode`]), where the derivatives come from
//! the reduced dual objective in [`dual`]. Multi-marginal Sinkhorn
//! ([`sinkhorn_mm`]) and Armijo gradient descent ([`refsolve`]) serve as
//! independent baselines. [`euler_chain`] carries the same scheme over to the
//! non-symmetric chain cost of the relaxed incompressible Euler problem.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod costs;
pub mod coupling;
pub mod dual;
mod enumerate;
pub mod error;
pub mod euler_chain;
pub mod linalg;
pub mod logsum;
pub mod ode;
pub mod refsolve;
pub mod sinkhorn_mm;
pub mod study;
pub mod tableau;
pub mod two_marginal;

pub use costs::{CostBundle, CostKind, DiscreteMarginal, Grid};
pub use dual::{DualDerivatives, Potential, ProblemParams};
pub use error::{Error, Result};
pub use ode::{Scheme, Trajectory};
pub use two_marginal::TwoMarginalSolution;
