//! Reconstruction of the potential coefficient `q` in
//!
//! ```text
//!     -Δu + q u = f   in Ω = (0,1)^d,     u = 0 on ∂Ω,
//! ```
//!
//! from noisy point values `m_i = u(q†)(x_i) + ξ_i`, by minimizing the
//! H¹-penalized least-squares functional
//!
//! ```text
//!     J_γ(q_h) = ‖u_h(q_h) − m‖²_n + γ ‖q_h‖²_{H¹}
//! ```
//!
//! over piecewise linear potentials constrained to a box `[c0, c1]`.
//!
//! The crate is organized bottom-up:
//!
//! - [`mesh`]: structured P1 triangulations of the unit interval/square and
//!   sampling-point generators.
//! - [`sparse`]: compressed-row matrices and a Jacobi-preconditioned CG solver.
//! - [`fem`]: operator assembly, forward/adjoint solves, point evaluation, norms.
//! - [`observation`]: fine-mesh ground truth, noise synthesis, the discrete semi-norm.
//! - [`inversion`]: objective, adjoint gradient, projected nonlinear CG, and the
//!   a priori / adaptive choices of `γ`.
//! - [`harness`]: experiment configuration, orchestration and CSV output.

pub mod error;
pub mod fem;
pub mod harness;
pub mod inversion;
pub mod mesh;
pub mod observation;
pub mod sparse;

pub use error::{Error, Result};
