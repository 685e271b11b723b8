//! Numerical laboratory for the modified Benjamin-Ono equation
//!
//! ```text
//! u_t + H u_xx = u^2 u_x,   H = Hilbert transform,   omega(xi) = -xi|xi|
//! ```
//!
//! The crate is organised bottom-up:
//!
//! * [`spectral`]: periodic grids, Fourier transforms, Fourier multipliers,
//!   Littlewood-Paley cutoffs and projections, Sobolev norms.
//! * [`solver`]: free propagator, dealiased cubic term, ETDRK4 / IF-RK4
//!   stepping and Picard iteration of the Duhamel formula.
//! * [`invariants`]: mass, L², Hamiltonian, drift reports and the
//!   `E^{l,s}` energy norm.
//! * [`energy`]: symbol classes, the quartic multiplier `b4`, the modified
//!   energies `E0`/`E1` and their time derivatives `R4`/`R6`.
//! * [`bourgain`]: resonance function, dyadic block functions in
//!   `(xi, tau - omega(xi))` coordinates, `X_k`/`B_k` norms, the quadrilinear
//!   functional `J` and space-time spectra.
//! * [`lab`]: the experiment sweeps built on top of everything else.

// `!(x > 0.0)` style guards are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bourgain;
pub mod cutoff;
pub mod energy;
pub mod error;
pub mod invariants;
pub mod lab;
pub mod quadrature;
pub mod report;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use num_complex::Complex64;
