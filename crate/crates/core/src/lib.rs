//! Nonsmooth analysis on low-dimensional Riemannian manifolds and
//! viscosity solvers for first-order Hamilton-Jacobi equations.

pub mod checks;
pub mod cli;
pub mod discretize;
pub mod error;
pub mod field;
pub mod hj;
pub mod manifold;
pub mod nonsmooth;

pub use error::{Error, Result};
