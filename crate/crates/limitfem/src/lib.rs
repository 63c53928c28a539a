//! Quadrilateral finite-element solver for strain-limiting nonlinear
//! thermoelasticity on the unit square, with and without an edge crack.
//!
//! The model couples one way: a linear heat equation is solved first, and
//! its gradient loads a quasilinear mechanics equation whose stress is the
//! linear elastic stress amplified by a strain-limiting factor. The
//! mechanics is linearized by Newton's method; each step solves one sparse
//! symmetric system.
//!
//! Module map:
//! - [`mesh`]: structured quad grids, boundary tags, slit via node duplication
//! - [`fem`]: Q1 shape functions, Gauss rules, isoparametric mapping, dofs
//! - [`constitutive`]: strain-limiting stress/strain maps and Newton tangent
//! - [`assembly`]: heat and Newton systems, residual norm, constraints
//! - [`linalg`]: CSR storage, SSOR-preconditioned CG, skyline LU
//! - [`solver`]: heat solve, Newton loop, whole experiments
//! - [`mms`]: manufactured-solution convergence study
//! - [`postproc`]: stress/strain recovery, crack-line profiles, VTK/CSV

pub mod assembly;
pub mod constitutive;
mod error;
pub mod fem;
pub mod linalg;
pub mod mesh;
pub mod mms;
pub mod postproc;
pub mod solver;

pub use constitutive::{MaterialParams, SymTensor2};
pub use error::FemError;
pub use mesh::{BoundaryTag, Mesh};
pub use solver::{Domain, Model, NewtonConfig, SolutionState, TemperatureCase};
