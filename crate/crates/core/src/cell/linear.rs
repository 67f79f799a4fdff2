use super::{CellError, SolveOptions};
use crate::linalg::{dist2, norm2, pcg, BandedCholesky, CgOptions, CsrMatrix, SolverError};

/// Linear-system backend for the box problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    /// Banded Cholesky for tridiagonal (1D) systems, CG otherwise.
    #[default]
    Auto,
    Cg,
    Direct,
}

#[derive(Debug, Clone)]
enum Kind {
    Cg(CgOptions),
    Direct(BandedCholesky, f64),
}

/// A solver for one fixed SPD matrix; factorizations are reused across
/// right-hand sides.
#[derive(Debug, Clone)]
pub struct LinearSolver {
    kind: Kind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSolve {
    pub x: Vec<f64>,
    /// CG iterations (0 for the direct backend).
    pub iterations: usize,
    pub rel_residual: f64,
}

impl LinearSolver {
    pub fn new(a: &CsrMatrix, dim: usize, opts: &SolveOptions) -> Result<Self, CellError> {
        let direct = match opts.backend {
            Backend::Auto => dim == 1 || a.bandwidth() <= 1,
            Backend::Cg => false,
            Backend::Direct => true,
        };
        let kind = if direct {
            Kind::Direct(BandedCholesky::factor(a)?, opts.cg.tol)
        } else {
            Kind::Cg(opts.cg)
        };
        Ok(LinearSolver { kind })
    }

    pub fn is_direct(&self) -> bool {
        matches!(self.kind, Kind::Direct(..))
    }

    /// Solve `a x = b`; `a` must be the matrix the solver was built for.
    pub fn solve(&self, a: &CsrMatrix, b: &[f64], x0: Option<&[f64]>) -> Result<LinearSolve, CellError> {
        match &self.kind {
            Kind::Cg(opts) => {
                let out = pcg(a, b, x0, opts)?;
                Ok(LinearSolve {
                    x: out.x,
                    iterations: out.iterations,
                    rel_residual: out.rel_residual,
                })
            }
            Kind::Direct(chol, tol) => {
                let b_norm = norm2(b);
                if b_norm == 0.0 {
                    return Ok(LinearSolve {
                        x: vec![0.0; b.len()],
                        iterations: 0,
                        rel_residual: 0.0,
                    });
                }
                let mut x = chol.solve_refined(a, b);
                let mut res = dist2(&a.matvec(&x), b) / b_norm;
                for _ in 0..3 {
                    if res <= *tol {
                        break;
                    }
                    let ax = a.matvec(&x);
                    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
                    for (xi, di) in x.iter_mut().zip(chol.solve(&r)) {
                        *xi += di;
                    }
                    res = dist2(&a.matvec(&x), b) / b_norm;
                }
                if res > *tol {
                    return Err(SolverError::DirectResidual { residual: res, tol: *tol }.into());
                }
                Ok(LinearSolve {
                    x,
                    iterations: 0,
                    rel_residual: res,
                })
            }
        }
    }
}
