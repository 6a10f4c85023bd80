//! Numerical core for a diffuse-interface Navier–Stokes/Allen–Cahn model and
//! the relative-energy diagnostics that compare it with a sharp-interface
//! reference solution.

pub mod calibration;
pub mod dwell;
pub mod error;
pub mod functionals;
pub mod grid;
pub mod quadrature;
pub mod reference;
pub mod solver;

pub use error::{Error, Result};
