//! Brute-force references for testing `reshom`.
//!
//! Everything here is deliberately naive: dense matrices, full
//! eigendecompositions from `nalgebra` and composite Simpson quadrature.
//! None of it shares code with the production solvers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use reshom::coeff::CoefficientField;
use reshom::linalg::CsrMatrix;
use thiserror::Error;

/// Largest matrix a [`DenseOracle`] accepts.
pub const MAX_DENSE: usize = 2500;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("dense oracle limited to {MAX_DENSE} unknowns, got {0}")]
    TooLarge(usize),
    #[error("vector of length {got} does not match {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("field is not one-dimensional and periodic")]
    NotPeriodic1d,
    #[error("field evaluation failed: {0}")]
    Field(String),
}

/// Dense copy of a symmetric matrix and its full eigendecomposition.
#[derive(Debug, Clone)]
pub struct DenseOracle {
    a: DMatrix<f64>,
    eig: SymmetricEigen<f64, nalgebra::Dyn>,
}

impl DenseOracle {
    pub fn new(a: &CsrMatrix) -> Result<Self, OracleError> {
        let n = a.n();
        if n > MAX_DENSE {
            return Err(OracleError::TooLarge(n));
        }
        let mut m = DMatrix::zeros(n, n);
        for (i, j, v) in a.iter() {
            m[(i, j)] = v;
        }
        Ok(Self::from_dense(m))
    }

    pub fn from_dense(a: DMatrix<f64>) -> Self {
        let eig = SymmetricEigen::new(a.clone());
        DenseOracle { a, eig }
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// Eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.eig.eigenvalues.iter().copied().collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v
    }

    /// `‖V Λ Vᵀ − A‖_max / ‖A‖_max`.
    pub fn reconstruction_error(&self) -> f64 {
        let v = &self.eig.eigenvectors;
        let rec = v * DMatrix::from_diagonal(&self.eig.eigenvalues) * v.transpose();
        (rec - &self.a).amax() / self.a.amax().max(f64::MIN_POSITIVE)
    }

    fn check(&self, g: &[f64]) -> Result<(), OracleError> {
        if g.len() != self.n() {
            return Err(OracleError::LengthMismatch {
                expected: self.n(),
                got: g.len(),
            });
        }
        Ok(())
    }

    /// `f(A) g` through the eigendecomposition.
    pub fn apply_function(&self, g: &[f64], f: impl Fn(f64) -> f64) -> Result<Vec<f64>, OracleError> {
        self.check(g)?;
        let v = &self.eig.eigenvectors;
        let mut c = v.transpose() * DVector::from_column_slice(g);
        for (ci, &lam) in c.iter_mut().zip(self.eig.eigenvalues.iter()) {
            *ci *= f(lam);
        }
        Ok((v * c).iter().copied().collect())
    }

    /// Dense Cholesky solve of `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, OracleError> {
        self.check(b)?;
        let chol = self.a.clone().cholesky().ok_or(OracleError::NotPositiveDefinite)?;
        Ok(chol.solve(&DVector::from_column_slice(b)).iter().copied().collect())
    }
}

/// `V e^{−TΛ} Vᵀ g`. At `T = 0` this returns `g` itself.
pub fn dense_expmv(oracle: &DenseOracle, g: &[f64], t: f64) -> Result<Vec<f64>, OracleError> {
    if t == 0.0 {
        oracle.check(g)?;
        return Ok(g.to_vec());
    }
    oracle.apply_function(g, |lam| (-t * lam).exp())
}

/// Dense solve of the corrected cell problem `A χ = g − e^{−TA} g`.
pub fn dense_corrected_cell(oracle: &DenseOracle, g: &[f64], t: f64) -> Result<Vec<f64>, OracleError> {
    oracle.apply_function(g, |lam| (1.0 - (-t * lam).exp()) / lam)
}

/// `(∫₀¹ a(x)⁻¹ dx)⁻¹` by composite Simpson with `panels` panels (rounded up
/// to even).
pub fn harmonic_mean_1d(field: &CoefficientField, panels: usize) -> Result<f64, OracleError> {
    if field.dim() != 1 || !field.is_periodic() {
        return Err(OracleError::NotPeriodic1d);
    }
    let a = |x: f64| field.entry(0, &[x]).map_err(|e| OracleError::Field(e.to_string()));
    let m = panels.max(2).next_multiple_of(2);
    let h = 1.0 / m as f64;
    let mut s = 1.0 / a(0.0)? + 1.0 / a(1.0)?;
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w / a(i as f64 * h)?;
    }
    Ok(1.0 / (s * h / 3.0))
}

/// Composite Simpson for a plain function on `[lo, hi]`.
pub fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> f64 {
    let m = panels.max(2).next_multiple_of(2);
    let h = (hi - lo) / m as f64;
    let mut s = f(lo) + f(hi);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(lo + i as f64 * h);
    }
    s * h / 3.0
}

/// Eigenvalues `(4/h²) sin²(kπh/2)`, `k = 1..n−1`, of the Dirichlet
/// second-difference matrix on `(0, 1)` with spacing `h = 1/n`, scaled to a
/// box of side `r`.
pub fn dirichlet_laplacian_eigenvalues(n: usize, r: f64) -> Vec<f64> {
    let h = r / n as f64;
    (1..n)
        .map(|k| {
            let s = (k as f64 * std::f64::consts::PI / (2.0 * n as f64)).sin();
            4.0 / (h * h) * s * s
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use reshom::coeff::builtin_family;
    use std::collections::BTreeMap;

    #[test]
    fn decoupled_modes() {
        let o = DenseOracle::from_dense(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0])));
        let y = dense_expmv(&o, &[1.0, 1.0], 1.0).unwrap();
        assert!((y[0] - (-1f64).exp()).abs() < 1e-15);
        assert!((y[1] - (-2f64).exp()).abs() < 1e-15);
        assert_eq!(dense_expmv(&o, &[0.3, 0.7], 0.0).unwrap(), vec![0.3, 0.7]);
    }

    #[test]
    fn semigroup_and_reconstruction() {
        let n = 30;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + (i % 4) as f64 * 0.25));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let o = DenseOracle::new(&CsrMatrix::from_triplets(n, t)).unwrap();
        assert!(o.reconstruction_error() <= 1e-9);
        let g: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let a = dense_expmv(&o, &dense_expmv(&o, &g, 0.35).unwrap(), 0.35).unwrap();
        let b = dense_expmv(&o, &g, 0.7).unwrap();
        let err: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-10);
    }

    #[test]
    fn harmonic_means() {
        let p = BTreeMap::new();
        let s = builtin_family("sine1d", &p, 1).unwrap();
        assert!((harmonic_mean_1d(&s, 1 << 14).unwrap() - 3f64.sqrt()).abs() <= 1e-12);
        let c = builtin_family("constant", &[("c".to_string(), 2.5)].into(), 1).unwrap();
        assert!((harmonic_mean_1d(&c, 8).unwrap() - 2.5).abs() < 1e-15);
        let cos = reshom::coeff::parse_expression("2 + cos(2*pi*x1)").unwrap();
        let f = CoefficientField::from_expressions(1, vec![cos], true).unwrap();
        assert!((harmonic_mean_1d(&f, 1 << 14).unwrap() - 3f64.sqrt()).abs() <= 1e-12);
    }

    #[test]
    fn simpson_halving_ratio() {
        // A smooth, non-periodic integrand so the error is not spectrally small.
        let f = |x: f64| (1.0 + x * x).recip();
        let exact = std::f64::consts::FRAC_PI_4;
        let e1 = (simpson(f, 0.0, 1.0, 8) - exact).abs();
        let e2 = (simpson(f, 0.0, 1.0, 16) - exact).abs();
        assert!(e1 / e2 >= 8.0, "{}", e1 / e2);

        let s = builtin_family("sine1d", &BTreeMap::new(), 1).unwrap();
        let h1 = (harmonic_mean_1d(&s, 4).unwrap() - 3f64.sqrt()).abs();
        let h2 = (harmonic_mean_1d(&s, 8).unwrap() - 3f64.sqrt()).abs();
        assert!(h1 / h2 >= 8.0, "{}", h1 / h2);
    }

    #[test]
    fn size_cap() {
        let n = MAX_DENSE + 1;
        let a = CsrMatrix::from_triplets(n, (0..n).map(|i| (i, i, 1.0)).collect());
        assert!(matches!(DenseOracle::new(&a), Err(OracleError::TooLarge(_))));
    }
}
