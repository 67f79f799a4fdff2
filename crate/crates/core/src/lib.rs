//! Numerical homogenization with a semigroup-corrected cell problem.
//!
//! The corrector on the box `K_R = (-R/2, R/2)^d` solves
//!
//! ```text
//! A χ = g − e^{−T A} g,     g = ∇·(a e_j),   χ = 0 on ∂K_R,
//! ```
//!
//! and the effective tensor is the filtered average of `a + a ∇χ` over a
//! smaller box `K_L`. Subtracting the heat-semigroup image of the source
//! makes the boundary (resonance) error decay exponentially in `R` instead of
//! like `1/R`.
//!
//! The crate is split bottom-up: [`coeff`] describes `a(x)`, [`grid`]
//! discretizes the operator, [`krylov`] applies `e^{−TA}`, [`cell`] solves
//! the corrector problems, [`upscale`] turns correctors into tensors and
//! [`study`] drives convergence sweeps.

pub mod cell;
pub mod coeff;
pub mod filters;
pub mod grid;
pub mod krylov;
pub mod linalg;
pub mod study;
pub mod upscale;

mod error;

pub use error::{Error, ErrorClass};
