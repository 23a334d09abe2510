//! Numerics for the linearized Couette flow in the channel `(-1, 1)`:
//! Chebyshev collocation, complex Airy functions, resolvent solvers,
//! estimate harness, time evolution and a small nonlinear mode solver.

pub mod airy;
pub mod error;
pub mod estimates;
pub mod evolution;
pub mod linalg;
pub mod nonlinear;
pub mod resolvent;
pub mod spectral;

pub use error::{Error, Result};
pub use num_complex::Complex64;
