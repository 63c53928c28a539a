//! Error type shared by all solver stages.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum FemError {
    /// The strain-limiting function was evaluated outside its domain
    /// (beta * energy norm reached or exceeded 1).
    StrainLimitViolation { energy_norm: f64, limit: f64 },
    /// Coercivity lost at a quadrature point during assembly.
    CoercivityViolation { cell: usize, energy_norm: f64 },
    /// Coercivity lost inside the Newton loop.
    NewtonCoercivity {
        iteration: usize,
        cell: usize,
        energy_norm: f64,
    },
    /// Structurally invalid mesh (untaggable face, bad refinement, ...).
    InvalidMesh(String),
    UnsupportedQuadrature(usize),
    NonPositiveJacobian { det: f64 },
    /// Two boundary conditions of equal priority prescribe different values
    /// at the same degree of freedom.
    ConflictingConstraint {
        dof: usize,
        existing: f64,
        requested: f64,
    },
    /// A Dirichlet problem was assembled with no constrained dofs.
    EmptyDirichletSet,
    /// Exact zero pivot during the direct factorization.
    SingularMatrix { pivot: usize },
    /// Zero p^T A p inner product in the conjugate gradient iteration.
    CgBreakdown { iteration: usize },
    /// The inner linear solver did not reach its tolerance.
    LinearSolveFailed { residual: f64, tol: f64 },
    /// Newton ran out of iterations in a context that requires convergence.
    NewtonDidNotConverge { residual: f64, tol: f64 },
    InvalidParams(String),
    InvalidArgument(String),
}

impl fmt::Display for FemError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FemError::StrainLimitViolation { energy_norm, limit } => write!(
                f,
                "strain limit violated: energy norm {energy_norm} >= limit {limit}"
            ),
            FemError::CoercivityViolation { cell, energy_norm } => write!(
                f,
                "coercivity violated in cell {cell}: beta * energy norm {energy_norm} >= 1"
            ),
            FemError::NewtonCoercivity {
                iteration,
                cell,
                energy_norm,
            } => write!(
                f,
                "coercivity violated at Newton iteration {iteration} (cell {cell}, energy norm {energy_norm})"
            ),
            FemError::InvalidMesh(msg) => write!(f, "invalid mesh: {msg}"),
            FemError::UnsupportedQuadrature(n) => {
                write!(f, "unsupported quadrature order {n} (expected 1..=5)")
            }
            FemError::NonPositiveJacobian { det } => {
                write!(f, "non-positive Jacobian determinant {det}")
            }
            FemError::ConflictingConstraint {
                dof,
                existing,
                requested,
            } => write!(
                f,
                "conflicting Dirichlet values at dof {dof}: {existing} vs {requested}"
            ),
            FemError::EmptyDirichletSet => {
                write!(f, "no Dirichlet constraints: the system is singular")
            }
            FemError::SingularMatrix { pivot } => {
                write!(f, "singular matrix: zero pivot at index {pivot}")
            }
            FemError::CgBreakdown { iteration } => {
                write!(f, "conjugate gradient breakdown at iteration {iteration}")
            }
            FemError::LinearSolveFailed { residual, tol } => {
                write!(f, "linear solve stalled at residual {residual} (tol {tol})")
            }
            FemError::NewtonDidNotConverge { residual, tol } => {
                write!(f, "Newton stopped at residual {residual} without reaching {tol}")
            }
            FemError::InvalidParams(msg) => write!(f, "invalid parameters: {msg}"),
            FemError::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
        }
    }
}

impl std::error::Error for FemError {}
