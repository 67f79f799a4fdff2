//! Dense and sparse linear algebra kernels shared by the solvers.
//!
//! Everything here works on plain `f64` slices. Reductions are always
//! sequential so results do not depend on the thread count.

mod banded;
mod cg;
mod csr;
mod symeig;

pub use banded::BandedCholesky;
pub use cg::{pcg, CgOptions, CgOutcome};
pub use csr::CsrMatrix;
pub use symeig::{
    symmetric_eigen, symmetric_eigenvalues, tridiagonal_eigen, ImplicitTridiagonalEigen, SymmetricEigen,
    TridiagonalEigen,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("conjugate gradients did not converge: relative residual {residual:.3e} after {iterations} iterations (tolerance {tol:.1e})")]
    CgNotConverged {
        iterations: usize,
        residual: f64,
        tol: f64,
    },
    #[error("matrix is not positive definite (pivot {pivot:.3e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("direct solve left relative residual {residual:.3e} above {tol:.1e}")]
    DirectResidual { residual: f64, tol: f64 },
    #[error("implicit QL iteration failed to converge for eigenvalue {index}")]
    EigenNotConverged { index: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("eigensolver did not converge: {converged} of {wanted} pairs after {matvecs} matrix-vector products")]
    LanczosNotConverged {
        converged: usize,
        wanted: usize,
        matvecs: usize,
    },
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn scale(alpha: f64, x: &mut [f64]) {
    for xi in x {
        *xi *= alpha;
    }
}

/// Euclidean distance `‖a − b‖₂`.
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Subtract the arithmetic mean in place.
pub fn remove_mean(x: &mut [f64]) {
    if x.is_empty() {
        return;
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    for xi in x {
        *xi -= mean;
    }
}
