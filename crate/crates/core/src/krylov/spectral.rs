use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_time, lanczos, KrylovError, LanczosDecomposition};
use crate::grid::DiscreteOperator;
use crate::linalg::{
    axpy, dot, norm2, scale, symmetric_eigen, BandedCholesky, symmetric_eigenvalues, tridiagonal_eigen, CsrMatrix,
    ImplicitTridiagonalEigen, SolverError,
};

/// Largest operator handled by a dense eigensolver.
pub const DENSE_LIMIT: usize = 4096;

/// Largest band storage `N·(bw+1)` factored for shift-invert Lanczos.
const BAND_LIMIT: usize = 1 << 25;

/// Required relative eigenpair residual `‖Aφ − λφ‖ / λ`.
const RESIDUAL_TOL: f64 = 1e-8;

/// The lowest `N_modes` eigenpairs of `A_h`.
#[derive(Debug, Clone)]
pub struct SpectralTruncation {
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    seed: u64,
    strategy: &'static str,
}

impl SpectralTruncation {
    pub fn n_modes(&self) -> usize {
        self.values.len()
    }

    /// Ascending eigenvalues.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `dense`, `tridiagonal` or `lanczos`.
    pub fn strategy(&self) -> &'static str {
        self.strategy
    }

    /// `g_k = ⟨g, φ_k⟩`.
    pub fn coefficients(&self, g: &[f64]) -> Vec<f64> {
        self.vectors.iter().map(|v| dot(v, g)).collect()
    }

    /// Keep only the lowest `n` modes.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.n_modes());
        SpectralTruncation {
            values: self.values[..n].to_vec(),
            vectors: self.vectors[..n].to_vec(),
            seed: self.seed,
            strategy: self.strategy,
        }
    }

    /// `max_k ‖A φ_k − λ_k φ_k‖ / λ_k`.
    pub fn max_relative_residual(&self, a: &CsrMatrix) -> f64 {
        self.values
            .iter()
            .zip(&self.vectors)
            .map(|(&lam, v)| {
                let mut r = a.matvec(v);
                axpy(-lam, v, &mut r);
                norm2(&r) / lam.abs()
            })
            .fold(0.0, f64::max)
    }
}

fn tridiagonal_parts(a: &CsrMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = a.n();
    let off = (0..n.saturating_sub(1)).map(|i| a.get(i, i + 1)).collect();
    (a.diagonal(), off)
}

fn random_start(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Grows a Lanczos space from a seeded random start until the lowest
/// `want` Ritz pairs satisfy the residual tolerance.
fn converged_lanczos(a: &CsrMatrix, want: usize, seed: u64) -> Result<LanczosDecomposition, KrylovError> {
    let n = a.n();
    let cap = n.min((50 * want).max(200));
    let mut k = n.min((2 * want + 20).max(40));
    let mut dec = lanczos(a, &random_start(n, seed), k)?;
    loop {
        let kk = dec.k();
        let eig = tridiagonal_eigen(dec.alpha(), dec.beta(), Some(&[kk - 1]))?;
        let beta = dec.residual_beta();
        let enough = kk >= want
            && (0..want).all(|i| beta * eig.rows[0][i].abs() <= RESIDUAL_TOL * eig.values[i].abs());
        if enough || dec.is_invariant() && kk >= want {
            return Ok(dec);
        }
        if dec.is_invariant() || kk >= cap {
            let converged = (0..want.min(kk))
                .take_while(|&i| beta * eig.rows[0][i].abs() <= RESIDUAL_TOL * eig.values[i].abs())
                .count();
            return Err(SolverError::LanczosNotConverged {
                converged,
                wanted: want,
                matvecs: kk,
            }
            .into());
        }
        k = (k + k / 2).min(cap);
        dec.extend(a, k);
    }
}

/// Lowest `want` eigenpairs through Lanczos on `A⁻¹`, whose largest
/// eigenvalues are well separated even when `A` is badly conditioned.
fn inverse_lanczos(
    a: &CsrMatrix,
    want: usize,
    seed: u64,
    vectors: bool,
) -> Result<(Vec<f64>, Vec<Vec<f64>>), KrylovError> {
    let n = a.n();
    let chol = BandedCholesky::factor(a)?;
    let cap = n.min((20 * want).max(100));
    let mut q = random_start(n, seed);
    let nq = norm2(&q);
    scale(1.0 / nq, &mut q);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    loop {
        basis.push(q);
        let j = basis.len() - 1;
        let mut w = chol.solve(&basis[j]);
        let al = dot(&basis[j], &w);
        alpha.push(al);
        for _ in 0..2 {
            for qi in &basis {
                let c = dot(qi, &w);
                axpy(-c, qi, &mut w);
            }
        }
        let b = norm2(&w);
        let k = basis.len();
        let invariant = b <= 1e-14 * al.abs();
        if k >= want && (k % 5 == 0 || invariant || k >= cap) {
            let eig = tridiagonal_eigen(&alpha, &beta, Some(&[k - 1]))?;
            let top = |i: usize| k - 1 - i;
            let ok = |i: usize| b * eig.rows[0][top(i)].abs() <= RESIDUAL_TOL * eig.values[top(i)].abs();
            if invariant || (0..want).all(ok) {
                let values = (0..want).map(|i| 1.0 / eig.values[top(i)]).collect();
                let mut vecs = Vec::new();
                if vectors {
                    let full = tridiagonal_eigen(&alpha, &beta, None)?;
                    for i in 0..want {
                        let mut v = vec![0.0; n];
                        for (r, qr) in basis.iter().enumerate() {
                            axpy(full.rows[r][top(i)], qr, &mut v);
                        }
                        let nv = norm2(&v);
                        scale(1.0 / nv, &mut v);
                        vecs.push(v);
                    }
                }
                return Ok((values, vecs));
            }
            if k >= cap {
                return Err(SolverError::LanczosNotConverged {
                    converged: (0..want).take_while(|&i| ok(i)).count(),
                    wanted: want,
                    matvecs: k,
                }
                .into());
            }
        }
        beta.push(b);
        scale(1.0 / b, &mut w);
        q = w;
    }
}

fn shift_invert_viable(a: &CsrMatrix) -> bool {
    a.n().saturating_mul(a.bandwidth() + 1) <= BAND_LIMIT
}

/// Lowest `n_modes` eigenpairs of `A` (ascending).
///
/// Tridiagonal operators (1D grids) use implicit QL directly, operators
/// with at most [`DENSE_LIMIT`] unknowns a dense solver, and larger ones
/// Lanczos with full reorthogonalization from a start vector drawn from
/// `seed`.
pub fn partial_eigendecomposition(
    a: &CsrMatrix,
    n_modes: usize,
    seed: u64,
) -> Result<SpectralTruncation, KrylovError> {
    let n = a.n();
    if n_modes > n {
        return Err(KrylovError::TooManyModes { requested: n_modes, n });
    }
    if n_modes == 0 {
        return Ok(SpectralTruncation {
            values: vec![],
            vectors: vec![],
            seed,
            strategy: "none",
        });
    }
    if a.bandwidth() <= 1 {
        let (d, e) = tridiagonal_parts(a);
        let eig = ImplicitTridiagonalEigen::new(&d, &e)?;
        let values = eig.sorted_values()[..n_modes].to_vec();
        let vectors = (0..n_modes).map(|r| eig.eigenvector(r)).collect();
        return Ok(SpectralTruncation {
            values,
            vectors,
            seed,
            strategy: "tridiagonal",
        });
    }
    if n <= DENSE_LIMIT {
        let eig = symmetric_eigen(&a.to_dense(), n)?;
        return Ok(SpectralTruncation {
            values: eig.values[..n_modes].to_vec(),
            vectors: (0..n_modes).map(|i| eig.vector(i)).collect(),
            seed,
            strategy: "dense",
        });
    }
    if shift_invert_viable(a) {
        let (values, vectors) = inverse_lanczos(a, n_modes, seed, true)?;
        return Ok(SpectralTruncation {
            values,
            vectors,
            seed,
            strategy: "shift-invert",
        });
    }
    let dec = converged_lanczos(a, n_modes, seed)?;
    let h = ImplicitTridiagonalEigen::new(dec.alpha(), dec.beta())?;
    let all = h.sorted_values();
    let mut vectors = Vec::with_capacity(n_modes);
    for r in 0..n_modes {
        let s = h.eigenvector(r);
        let mut v = vec![0.0; n];
        for (q, &c) in dec.basis().iter().zip(&s) {
            axpy(c, q, &mut v);
        }
        let nv = norm2(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        vectors.push(v);
    }
    Ok(SpectralTruncation {
        values: all[..n_modes].to_vec(),
        vectors,
        seed,
        strategy: "lanczos",
    })
}

/// Lowest `count` eigenvalues of `A`, ascending, without eigenvectors.
pub fn lowest_eigenvalues(a: &CsrMatrix, count: usize, seed: u64) -> Result<Vec<f64>, KrylovError> {
    let n = a.n();
    if count > n {
        return Err(KrylovError::TooManyModes { requested: count, n });
    }
    if count == 0 {
        return Ok(vec![]);
    }
    let mut vals = if a.bandwidth() <= 1 {
        let (d, e) = tridiagonal_parts(a);
        tridiagonal_eigen(&d, &e, Some(&[]))?.values
    } else if n <= DENSE_LIMIT {
        symmetric_eigenvalues(&a.to_dense(), n)?
    } else if shift_invert_viable(a) {
        inverse_lanczos(a, count, seed, false)?.0
    } else {
        let dec = converged_lanczos(a, count, seed)?;
        tridiagonal_eigen(dec.alpha(), dec.beta(), Some(&[]))?.values
    };
    vals.truncate(count);
    Ok(vals)
}

/// `Σ_k e^{−λ_k T} ⟨g, φ_k⟩ φ_k` over the stored modes.
pub fn expmv_spectral(trunc: &SpectralTruncation, g: &[f64], t: f64) -> Result<Vec<f64>, KrylovError> {
    check_time(t)?;
    let mut out = vec![0.0; g.len()];
    for (lam, v) in trunc.values.iter().zip(&trunc.vectors) {
        if v.len() != g.len() {
            return Err(KrylovError::LengthMismatch {
                expected: v.len(),
                got: g.len(),
            });
        }
        axpy((-lam * t).exp() * dot(v, g), v, &mut out);
    }
    Ok(out)
}

/// Largest `c` with `λ_k ≥ c k^{2/d} R^{−2}` for the lowest `n_eigs`
/// eigenvalues (`k` counted from 1).
pub fn estimate_cd(op: &DiscreteOperator, n_eigs: usize) -> Result<f64, KrylovError> {
    if n_eigs < 4 {
        return Err(KrylovError::TooFewEigenvalues { min: 4, got: n_eigs });
    }
    let grid = op.grid();
    let vals = lowest_eigenvalues(op.matrix(), n_eigs, super::DEFAULT_SEED)?;
    let r2 = grid.r() * grid.r();
    let p = 2.0 / grid.dim() as f64;
    Ok(vals
        .iter()
        .enumerate()
        .map(|(i, &lam)| lam * r2 / ((i + 1) as f64).powf(p))
        .fold(f64::INFINITY, f64::min))
}

/// Eigen-information sufficient to apply truncated spectral sums.
///
/// For tridiagonal operators every mode is available implicitly through
/// the QL rotations; otherwise the explicit lowest modes are stored.
#[derive(Debug, Clone)]
pub enum SpectralBasis {
    Tridiagonal(ImplicitTridiagonalEigen),
    Modes(SpectralTruncation),
}

impl SpectralBasis {
    /// Prepare for truncation levels up to `n_modes`.
    pub fn new(a: &CsrMatrix, n_modes: usize, seed: u64) -> Result<Self, KrylovError> {
        if n_modes > a.n() {
            return Err(KrylovError::TooManyModes {
                requested: n_modes,
                n: a.n(),
            });
        }
        if a.bandwidth() <= 1 && a.n() > 0 {
            let (d, e) = tridiagonal_parts(a);
            return Ok(SpectralBasis::Tridiagonal(ImplicitTridiagonalEigen::new(&d, &e)?));
        }
        Ok(SpectralBasis::Modes(partial_eigendecomposition(a, n_modes, seed)?))
    }

    /// Modes that can be used.
    pub fn available(&self) -> usize {
        match self {
            SpectralBasis::Tridiagonal(e) => e.len(),
            SpectralBasis::Modes(t) => t.n_modes(),
        }
    }

    /// Eigenvalues of the available modes, ascending.
    pub fn values(&self) -> Vec<f64> {
        match self {
            SpectralBasis::Tridiagonal(e) => e.sorted_values(),
            SpectralBasis::Modes(t) => t.values().to_vec(),
        }
    }

    /// Truncated `e^{−A_N T} g` with the lowest `n_modes` modes.
    pub fn expmv(&self, g: &[f64], t: f64, n_modes: usize) -> Result<Vec<f64>, KrylovError> {
        check_time(t)?;
        if n_modes > self.available() {
            return Err(KrylovError::TooManyModes {
                requested: n_modes,
                n: self.available(),
            });
        }
        match self {
            SpectralBasis::Tridiagonal(e) => {
                if g.len() != e.len() {
                    return Err(KrylovError::LengthMismatch {
                        expected: e.len(),
                        got: g.len(),
                    });
                }
                Ok(e.apply(g, |lam, rank| if rank < n_modes { (-lam * t).exp() } else { 0.0 }))
            }
            SpectralBasis::Modes(tr) => expmv_spectral(&tr.truncated(n_modes), g, t),
        }
    }
}
