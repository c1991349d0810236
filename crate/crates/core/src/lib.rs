//! Simulation of the two-stage time-fractional stochastic diffusion equation
//! on the unit sphere.

pub mod error;
pub mod experiments;
pub mod io;
pub mod quadrature;
pub mod selftest;
pub mod specfun;
pub mod spectra;
pub mod stochastic;
pub mod synthesis;

pub use error::{Error, Result};
