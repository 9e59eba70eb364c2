//! Coupled Westervelt-Pennes simulator for nonlinear ultrasonic heating
//! with thermal lensing.
//!
//! The crate solves the quasilinear system
//!
//! ```text
//! p_tt - q(Theta) lap p - b lap p_t = k(Theta) (p^2)_tt
//! rho_a C_a Theta_t - kappa_a lap Theta + rho_b C_b W (Theta - Theta_a) = Q(p_t)
//! ```
//!
//! on an interval or rectangle with homogeneous Dirichlet boundaries,
//! by a per-step fixed-point (Picard) iteration over frozen-coefficient
//! linear sub-solves: an implicit Newmark step for the damped wave part
//! and Crank-Nicolson for the bioheat part. Energy functionals, a
//! discrete Gronwall certificate, non-degeneracy guards, and a
//! manufactured-solution verification harness come along.

// `!(x > 0.0)` in validations intentionally rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod absorption;
pub mod config;
pub mod coupled;
pub mod energy;
pub mod error;
pub mod grid;
pub mod io;
pub mod linear;
pub mod material;
pub mod mms;
pub mod verify;

pub use error::{Result, SimError};
