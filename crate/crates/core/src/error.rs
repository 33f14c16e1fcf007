use thiserror::Error;

/// Errors produced by the solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("cost matrix has a non-finite entry at ({row}, {col})")]
    NonFiniteCost { row: usize, col: usize },

    #[error("cost matrix is not symmetric at ({row}, {col})")]
    AsymmetricCost { row: usize, col: usize },

    #[error("enumeration of {required} tuples exceeds the budget of {budget}")]
    SizeGuard { required: u128, budget: u128 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    MaxIterExceeded { iterations: usize, residual: f64 },

    #[error("line search stalled at step {step:e}")]
    LineSearchStall { step: f64 },

    #[error("reduced Hessian is not positive definite at epsilon = {epsilon}")]
    NotSpd { epsilon: f64 },

    #[error("potential bound violated at epsilon = {epsilon}: |phi| = {sup} > {bound}")]
    BoundViolation { epsilon: f64, sup: f64, bound: f64 },

    #[error("negative coupling entry {value:e} at flat index {index}")]
    NegativeEntry { index: usize, value: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
