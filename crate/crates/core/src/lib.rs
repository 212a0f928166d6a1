//! Numerical lab for the energy-critical aggregation-diffusion equation
//! `u_t = Δu^m - ∇·(u ∇c)` with `c` the Riesz potential of order `2s` and
//! `m = 2d/(d + 2s)`, restricted to radial solutions.
//!
//! The crate covers kernel assembly ([`riesz`]), the steady-state family
//! ([`steady`]), a finite-volume solver ([`solver`]) and the integral
//! identities used to check all of them ([`diagnostics`]).

pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod params;
pub mod quadrature;
pub mod riesz;
pub mod solver;
pub mod special;
pub mod steady;

pub use error::{Error, Result};
pub use grid::{Profile, RadialGrid};
pub use params::ModelParams;
pub use riesz::KernelMatrix;
pub use steady::SteadyState;
