//! Geodesic Euler integrators on constant-curvature Riemannian manifolds,
//! together with the machinery needed to certify non-expansive step sizes:
//! cocoercivity constants, Jacobi-field norm changes and implicit step-size
//! bounds for positive and negative sectional curvature.
//!
//! The crate is organised bottom-up:
//!
//! | module | content |
//! |--------|---------|
//! | [`manifolds`] | S², ℍ², S³ and flat ℝᵈ in explicit charts |
//! | [`fields`] | example vector fields and covariant derivatives |
//! | [`jacobi`] | closed-form Jacobi fields and the norm-change formula |
//! | [`constants`] | log g-norm, α, μ₊, μ₋, σ and C at points and over samples |
//! | [`bounds`] | step-size bound solvers |
//! | [`integrators`] | GEE / GIE stepping and expansivity measurement |
//! | [`experiments`] | direction sweeps, numerical maximal steps, figure sweeps |
//! | [`cli`] | command-line front end and CSV output |

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod constants;
pub mod error;
pub mod experiments;
pub mod fields;
pub mod integrators;
pub mod jacobi;
pub mod linalg;
pub mod manifolds;
pub mod ode;

pub use error::{Error, Result};
