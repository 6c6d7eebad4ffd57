//! Sparse storage, boundary constraints and linear solvers.

mod csr;
pub(crate) mod dense;
mod direct;
mod iterative;
mod system;

pub use csr::CsrMatrix;
pub use direct::Factorization;
pub use iterative::{gmres, Ilu0};
pub use system::{apply_dirichlet, solve, LinearSystem, MeanConstraint, Solver, SolverKind};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("matrix is {rows}x{cols}, right-hand side has {rhs} entries")]
    DimensionMismatch { rows: usize, cols: usize, rhs: usize },
    #[error("constrained DOF {0} is out of range")]
    InvalidConstraint(usize),
    #[error("matrix is singular (zero pivot at {pivot:?})")]
    Singular { pivot: Option<usize> },
    #[error("relative residual {residual:e} exceeds tolerance after refinement")]
    ResidualTooLarge { residual: f64 },
    #[error("GMRES did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("factorization failed: {0}")]
    Backend(&'static str),
}

/// Relative residual tolerance every solve must meet.
pub const RESIDUAL_TOL: f64 = 1e-10;

pub(crate) fn norm2(v: &[f64]) -> f64 {
    crate::math::sqrt(v.iter().map(|x| x * x).sum())
}
