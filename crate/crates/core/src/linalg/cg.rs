use super::{axpy, dot, norm2, remove_mean, CsrMatrix, SolverError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    /// Relative residual target `‖b − Ax‖ / ‖b‖`.
    pub tol: f64,
    /// Iteration cap; `None` means `20·√N + 500`.
    pub max_iter: Option<usize>,
    /// Restrict iterates to the mean-zero subspace (singular periodic systems).
    pub project_mean: bool,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: None,
            project_mean: false,
        }
    }
}

impl CgOptions {
    pub fn iteration_cap(&self, n: usize) -> usize {
        self.max_iter
            .unwrap_or_else(|| (20.0 * (n as f64).sqrt()).ceil() as usize + 500)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// True relative residual recomputed from `x` at exit.
    pub rel_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for SPD (or, with
/// `project_mean`, symmetric positive semidefinite with constant kernel)
/// systems.
pub fn pcg(
    a: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    opts: &CgOptions,
) -> Result<CgOutcome, SolverError> {
    let n = a.n();
    if b.len() != n {
        return Err(SolverError::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    let mut rhs = b.to_vec();
    if opts.project_mean {
        remove_mean(&mut rhs);
    }
    let b_norm = norm2(&rhs);
    if b_norm == 0.0 {
        return Ok(CgOutcome {
            x: vec![0.0; n],
            iterations: 0,
            rel_residual: 0.0,
        });
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let mut x = match x0 {
        Some(x0) => {
            if x0.len() != n {
                return Err(SolverError::DimensionMismatch {
                    expected: n,
                    got: x0.len(),
                });
            }
            x0.to_vec()
        }
        None => vec![0.0; n],
    };
    if opts.project_mean {
        remove_mean(&mut x);
    }
    let mut r = rhs.clone();
    let mut ap = vec![0.0; n];
    a.matvec_into(&x, &mut ap);
    axpy(-1.0, &ap, &mut r);

    let precondition = |r: &[f64], z: &mut Vec<f64>| {
        for ((zi, ri), di) in z.iter_mut().zip(r).zip(&inv_diag) {
            *zi = ri * di;
        }
        if opts.project_mean {
            remove_mean(z);
        }
    };

    let mut z = vec![0.0; n];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let cap = opts.iteration_cap(n);
    let mut iterations = 0;

    while norm2(&r) > opts.tol * b_norm {
        if iterations >= cap {
            break;
        }
        a.matvec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
        iterations += 1;
        // Refresh the recursive residual periodically to limit drift.
        if iterations % 256 == 0 {
            a.matvec_into(&x, &mut ap);
            for ((ri, bi), ai) in r.iter_mut().zip(&rhs).zip(&ap) {
                *ri = bi - ai;
            }
        }
    }

    if opts.project_mean {
        remove_mean(&mut x);
    }
    let rel_residual = true_residual(a, &rhs, &x) / b_norm;
    if rel_residual > opts.tol {
        return Err(SolverError::CgNotConverged {
            iterations,
            residual: rel_residual,
            tol: opts.tol,
        });
    }
    Ok(CgOutcome {
        x,
        iterations,
        rel_residual,
    })
}

pub(crate) fn true_residual(a: &CsrMatrix, b: &[f64], x: &[f64]) -> f64 {
    let ax = a.matvec(x);
    super::dist2(b, &ax)
}
