use super::{check_time, hochbruck_lubich_bound, KrylovError};
use crate::linalg::{axpy, dot, norm2, scale, CsrMatrix, ImplicitTridiagonalEigen};

/// Relative size of `β_j` (against `‖A q_j‖`) below which the Krylov space
/// is taken to be invariant.
const BREAKDOWN: f64 = 1e-12;

/// `A Q_k = Q_k H_k + β_k q_{k+1} e_kᵀ` with `Q_k` orthonormal and `H_k`
/// symmetric tridiagonal. Can be extended in place.
#[derive(Debug, Clone)]
pub struct LanczosDecomposition {
    basis: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    next: Vec<f64>,
    next_beta: f64,
    g_norm: f64,
    requested: usize,
    invariant: bool,
}

/// `k`-step Lanczos started from `g / ‖g‖`, with two-pass modified
/// Gram–Schmidt against every earlier basis vector.
pub fn lanczos(a: &CsrMatrix, g: &[f64], k: usize) -> Result<LanczosDecomposition, KrylovError> {
    if g.len() != a.n() {
        return Err(KrylovError::LengthMismatch {
            expected: a.n(),
            got: g.len(),
        });
    }
    let g_norm = norm2(g);
    if g_norm == 0.0 {
        return Err(KrylovError::ZeroVector);
    }
    let mut q = g.to_vec();
    scale(1.0 / g_norm, &mut q);
    let mut dec = LanczosDecomposition {
        basis: Vec::new(),
        alpha: Vec::new(),
        beta: Vec::new(),
        next: q,
        next_beta: g_norm,
        g_norm,
        requested: 0,
        invariant: false,
    };
    dec.extend(a, k);
    Ok(dec)
}

impl LanczosDecomposition {
    /// Grow the space to dimension `k` (capped at `N`) unless it is already
    /// invariant.
    pub fn extend(&mut self, a: &CsrMatrix, k: usize) {
        let k = k.min(a.n());
        self.requested = self.requested.max(k);
        let mut w = vec![0.0; a.n()];
        while self.basis.len() < k && !self.invariant {
            let q = std::mem::take(&mut self.next);
            if !self.basis.is_empty() {
                self.beta.push(self.next_beta);
            }
            self.basis.push(q);
            let j = self.basis.len() - 1;
            let q = &self.basis[j];
            a.matvec_into(q, &mut w);
            let aq = norm2(&w);
            let al = dot(q, &w);
            axpy(-al, q, &mut w);
            if j > 0 {
                axpy(-self.beta[j - 1], &self.basis[j - 1], &mut w);
            }
            for _ in 0..2 {
                for qi in &self.basis {
                    let c = dot(qi, &w);
                    axpy(-c, qi, &mut w);
                }
            }
            self.alpha.push(al);
            let b = norm2(&w);
            self.next_beta = b;
            if b <= BREAKDOWN * aq || aq == 0.0 {
                self.invariant = true;
            } else {
                let mut next = w.clone();
                scale(1.0 / b, &mut next);
                self.next = next;
            }
        }
    }

    /// Effective dimension.
    pub fn k(&self) -> usize {
        self.basis.len()
    }

    /// Largest dimension asked for so far.
    pub fn requested(&self) -> usize {
        self.requested
    }

    /// Diagonal of `H`.
    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Off-diagonal of `H` (`beta[i]` couples `i` and `i+1`).
    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// `β_k`, the coupling to the next (not yet accepted) basis vector.
    pub fn residual_beta(&self) -> f64 {
        if self.invariant {
            0.0
        } else {
            self.next_beta
        }
    }

    pub fn g_norm(&self) -> f64 {
        self.g_norm
    }

    /// True when the process stopped on an invariant subspace.
    pub fn is_invariant(&self) -> bool {
        self.invariant
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    /// `max |QᵀQ − I|`.
    pub fn orthogonality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, qi) in self.basis.iter().enumerate() {
            for (j, qj) in self.basis.iter().enumerate().take(i + 1) {
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(qi, qj) - want).abs());
            }
        }
        worst
    }

    /// `max_i |q_i · q_k|` for the newest vector plus its norm defect; an
    /// `O(kN)` proxy for [`Self::orthogonality_defect`].
    pub fn newest_orthogonality_defect(&self) -> f64 {
        let Some(last) = self.basis.last() else {
            return 0.0;
        };
        let k = self.basis.len();
        let mut worst = (dot(last, last) - 1.0).abs();
        for q in &self.basis[..k - 1] {
            worst = worst.max(dot(q, last).abs());
        }
        worst
    }

    /// Frobenius norm of `A Q − Q H − β_k q_{k+1} e_kᵀ`, relative to `‖A Q‖_F`.
    pub fn recurrence_residual(&self, a: &CsrMatrix) -> f64 {
        let k = self.k();
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..k {
            let mut r = a.matvec(&self.basis[j]);
            den += dot(&r, &r);
            axpy(-self.alpha[j], &self.basis[j], &mut r);
            if j > 0 {
                axpy(-self.beta[j - 1], &self.basis[j - 1], &mut r);
            }
            if j + 1 < k {
                axpy(-self.beta[j], &self.basis[j + 1], &mut r);
            } else if !self.invariant {
                axpy(-self.next_beta, &self.next, &mut r);
            }
            num += dot(&r, &r);
        }
        if den == 0.0 {
            0.0
        } else {
            (num / den).sqrt()
        }
    }

    /// Eigenvalues of `H` (Ritz values), ascending.
    pub fn ritz_values(&self) -> Result<Vec<f64>, KrylovError> {
        Ok(ImplicitTridiagonalEigen::new(&self.alpha, &self.beta)?.sorted_values())
    }

    /// `y = e^{−T H} e_1` in the Krylov basis.
    fn small_expm_e1(&self, t: f64) -> Result<Vec<f64>, KrylovError> {
        let eig = ImplicitTridiagonalEigen::new(&self.alpha, &self.beta)?;
        let mut e1 = vec![0.0; self.k()];
        e1[0] = 1.0;
        Ok(eig.apply(&e1, |lam, _| (-t * lam).exp()))
    }

    /// `‖g‖ Q y`
    fn lift(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.basis[0].len()];
        for (q, &c) in self.basis.iter().zip(y) {
            axpy(self.g_norm * c, q, &mut out);
        }
        out
    }
}

/// `‖g‖ Q e^{−T H} e_1 ≈ e^{−T A} g`.
pub fn expmv_lanczos(dec: &LanczosDecomposition, t: f64) -> Result<Vec<f64>, KrylovError> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(dec.lift(&[1.0]));
    }
    let y = dec.small_expm_e1(t)?;
    Ok(dec.lift(&y))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveOptions {
    /// Initial Krylov dimension.
    pub k_start: usize,
    /// Hard cap on the dimension.
    pub k_max: usize,
    /// Target for the a-posteriori estimate relative to `‖g‖`.
    pub tol: f64,
}

/// Diagnostics of one Lanczos matrix-exponential evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct LanczosReport {
    pub k_requested: usize,
    pub k_effective: usize,
    pub invariant: bool,
    pub g_norm: f64,
    /// `‖g‖ β_k |[e^{−TH}]_{k,1}|`, relative to `‖g‖`.
    pub estimate: f64,
    /// A-priori bound for `ρ` the Gershgorin bound of `T·A` (may be `+∞`).
    pub bound: f64,
    /// `max |q_i · q_k|` of the newest vector.
    pub orthogonality_defect: f64,
    pub matvecs: usize,
}

/// Lanczos `e^{−TA} g`, growing the space until the a-posteriori estimate
/// `β_k |[e^{−TH}]_{k,1}|` drops below `tol` or `k_max` is reached.
///
/// The estimate is only trusted once `k ≥ √ρ` with `ρ` the Gershgorin bound
/// of `T·A`; below that the Krylov polynomial has not resolved the spectrum
/// and the estimate can be small while the error is not.
pub fn expmv_adaptive(
    a: &CsrMatrix,
    g: &[f64],
    t: f64,
    opts: &AdaptiveOptions,
) -> Result<(Vec<f64>, LanczosReport), KrylovError> {
    check_time(t)?;
    let n = a.n();
    let k_max = opts.k_max.clamp(1, n.max(1));
    let trusted = (t * a.gershgorin_bound()).sqrt().ceil() as usize;
    let mut k = opts.k_start.max(trusted).clamp(1, k_max);
    let mut dec = lanczos(a, g, k)?;
    loop {
        let y = if t == 0.0 {
            let mut e1 = vec![0.0; dec.k()];
            e1[0] = 1.0;
            e1
        } else {
            dec.small_expm_e1(t)?
        };
        let estimate = dec.residual_beta() * y[dec.k() - 1].abs();
        if estimate <= opts.tol || dec.is_invariant() || dec.k() >= k_max {
            let report = LanczosReport {
                k_requested: dec.requested(),
                k_effective: dec.k(),
                invariant: dec.is_invariant(),
                g_norm: dec.g_norm(),
                estimate,
                bound: hochbruck_lubich_bound(t * a.gershgorin_bound(), dec.k(), dec.g_norm()),
                orthogonality_defect: dec.newest_orthogonality_defect(),
                matvecs: dec.k(),
            };
            return Ok((dec.lift(&y), report));
        }
        k = (k + k / 4).max(k + 8).min(k_max);
        dec.extend(a, k);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{symmetric_eigen, tridiagonal_eigen};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn laplacian(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, t)
    }

    fn laplacian_2d(m: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for j in 0..m {
            for i in 0..m {
                let p = i + m * j;
                t.push((p, p, 4.0 + 0.3 * ((i * j) % 3) as f64));
                if i + 1 < m {
                    t.push((p, p + 1, -1.0));
                    t.push((p + 1, p, -1.0));
                }
                if j + 1 < m {
                    t.push((p, p + m, -1.0));
                    t.push((p + m, p, -1.0));
                }
            }
        }
        CsrMatrix::from_triplets(m * m, t)
    }

    fn dense_expmv(a: &CsrMatrix, g: &[f64], t: f64) -> Vec<f64> {
        let n = a.n();
        let eig = symmetric_eigen(&a.to_dense(), n).unwrap();
        let mut out = vec![0.0; n];
        for i in 0..n {
            let v = eig.vector(i);
            let c = dot(&v, g) * (-t * eig.values[i]).exp();
            axpy(c, &v, &mut out);
        }
        out
    }

    #[test]
    fn eigenvector_start_is_invariant_after_one_step() {
        let n = 15;
        let a = laplacian(n);
        let lam = 4.0 * (3.0 * std::f64::consts::PI / (2.0 * (n + 1) as f64)).sin().powi(2);
        let v: Vec<f64> = (1..=n)
            .map(|i| (3.0 * std::f64::consts::PI * i as f64 / (n + 1) as f64).sin())
            .collect();
        let dec = lanczos(&a, &v, 5).unwrap();
        assert_eq!(dec.k(), 1);
        assert!(dec.is_invariant());
        assert!((dec.alpha()[0] - lam).abs() < 1e-13);
        let y = expmv_lanczos(&dec, 2.0).unwrap();
        for (yi, vi) in y.iter().zip(&v) {
            assert!((yi - (-2.0 * lam).exp() * vi).abs() < 1e-13);
        }
    }

    #[test]
    fn full_dimension_reproduces_spectrum() {
        let n = 15;
        let a = laplacian(n);
        let g: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.7).sin()).collect();
        let dec = lanczos(&a, &g, n).unwrap();
        assert_eq!(dec.k(), n);
        let ritz = tridiagonal_eigen(dec.alpha(), dec.beta(), Some(&[])).unwrap().values;
        for (k, lam) in ritz.iter().enumerate() {
            let exact = 4.0 * (((k + 1) as f64) * std::f64::consts::PI / (2.0 * (n + 1) as f64)).sin().powi(2);
            assert!((lam - exact).abs() < 1e-10);
        }
        assert!(dec.orthogonality_defect() < 1e-12);
    }

    #[test]
    fn random_start_stays_orthonormal() {
        let a = laplacian_2d(31);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g: Vec<f64> = (0..a.n()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dec = lanczos(&a, &g, 30).unwrap();
        assert_eq!(dec.k(), 30);
        assert!(dec.orthogonality_defect() <= 1e-10);
        assert!(dec.recurrence_residual(&a) <= 1e-8);
        assert!(dec.beta().iter().all(|&b| b > 0.0));
    }

    #[test]
    fn matches_dense_oracle() {
        let a = laplacian_2d(15);
        let g: Vec<f64> = (0..a.n()).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let dec = lanczos(&a, &g, 40).unwrap();
        let y = expmv_lanczos(&dec, 1.0).unwrap();
        let want = dense_expmv(&a, &g, 1.0);
        let err = crate::linalg::dist2(&y, &want) / norm2(&want);
        assert!(err <= 1e-8, "{err}");
    }

    #[test]
    fn time_zero_and_large_time() {
        let a = laplacian_2d(7);
        let g: Vec<f64> = (0..a.n()).map(|i| (i as f64).cos()).collect();
        let dec = lanczos(&a, &g, 10).unwrap();
        let y0 = expmv_lanczos(&dec, 0.0).unwrap();
        assert!(crate::linalg::dist2(&y0, &g) <= 1e-12 * norm2(&g));
        let lmin = dec.ritz_values().unwrap()[0];
        let y = expmv_lanczos(&dec, 60.0 / lmin).unwrap();
        assert!(norm2(&y) <= 1e-20 * norm2(&g));
        assert!(matches!(expmv_lanczos(&dec, -1.0), Err(KrylovError::NegativeTime(_))));
        assert!(matches!(lanczos(&a, &vec![0.0; a.n()], 3), Err(KrylovError::ZeroVector)));
    }

    #[test]
    fn adaptive_meets_estimate() {
        let a = laplacian_2d(20);
        let a = a.shifted(0.0, 100.0);
        let g: Vec<f64> = (0..a.n()).map(|i| 1.0 + ((i * 13) % 7) as f64).collect();
        let opts = AdaptiveOptions {
            k_start: 4,
            k_max: 400,
            tol: 1e-12,
        };
        let (y, rep) = expmv_adaptive(&a, &g, 0.5, &opts).unwrap();
        let want = dense_expmv(&a, &g, 0.5);
        assert!(rep.k_effective > 4 && rep.k_effective < 400);
        let err = crate::linalg::dist2(&y, &want) / norm2(&g);
        assert!(err <= 1e-10, "err {err} k {}", rep.k_effective);
    }
}
