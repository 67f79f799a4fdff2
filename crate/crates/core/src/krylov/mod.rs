//! Action of the heat semigroup `e^{−T A_h}` on a vector.
//!
//! Two routes are provided: symmetric Lanczos projection (the matrix
//! function is evaluated on the small tridiagonal `H = Qᵀ A Q`) and spectral
//! truncation onto the lowest eigenmodes of `A_h`.

mod bounds;
mod lanczos;
mod spectral;

pub use bounds::{choose_k, hochbruck_lubich_bound};
pub use lanczos::{expmv_adaptive, expmv_lanczos, lanczos, AdaptiveOptions, LanczosDecomposition, LanczosReport};
pub use spectral::{
    estimate_cd, expmv_spectral, lowest_eigenvalues, partial_eigendecomposition, SpectralBasis,
    SpectralTruncation, DENSE_LIMIT,
};

use thiserror::Error;

use crate::linalg::SolverError;

/// Seed of the start vectors used by iterative eigensolvers.
pub const DEFAULT_SEED: u64 = 0x5eed_0f_11ce;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KrylovError {
    #[error("start vector is zero (e^(-TA) 0 = 0 needs no Krylov space)")]
    ZeroVector,
    #[error("time horizon T = {0} must be non-negative")]
    NegativeTime(f64),
    #[error("requested {requested} modes but the operator has only {n} unknowns")]
    TooManyModes { requested: usize, n: usize },
    #[error("at least {min} eigenvalues are needed, got {got}")]
    TooFewEigenvalues { min: usize, got: usize },
    #[error("vector of length {got} does not match operator size {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

fn check_time(t: f64) -> Result<(), KrylovError> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(KrylovError::NegativeTime(t))
    }
}
