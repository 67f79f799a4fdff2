//! Symmetric eigensolvers: implicit QL on tridiagonal matrices and
//! Householder reduction for dense ones.

use super::SolverError;

/// Eigen-decomposition of a symmetric tridiagonal matrix.
///
/// `rows[t][i]` is component `tracked[t]` of the `i`-th eigenvector, with
/// eigenvalues sorted ascending. Tracking only a few rows (for example the
/// first and last) costs `O(rows·n)` per rotation instead of `O(n²)`.
#[derive(Debug, Clone)]
pub struct TridiagonalEigen {
    pub values: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

/// Eigenvalues and selected eigenvector rows of the tridiagonal matrix with
/// diagonal `diag` and off-diagonal `off` (`off[i]` couples `i` and `i+1`).
/// `tracked = None` returns every row, i.e. the full eigenvector matrix.
pub fn tridiagonal_eigen(
    diag: &[f64],
    off: &[f64],
    tracked: Option<&[usize]>,
) -> Result<TridiagonalEigen, SolverError> {
    let n = diag.len();
    assert!(n == 0 || off.len() + 1 == n, "off-diagonal length must be n-1");
    let all: Vec<usize>;
    let tracked = match tracked {
        Some(t) => t,
        None => {
            all = (0..n).collect();
            &all
        }
    };
    let r = tracked.len();
    let mut z = vec![0.0; r * n];
    for (t, &row) in tracked.iter().enumerate() {
        z[t * n + row] = 1.0;
    }
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n.saturating_sub(1)].copy_from_slice(off);
    implicit_ql(&mut d, &mut e, &mut z, r, None)?;
    let (values, z) = sort_pairs(d, &z, r);
    let rows = z.chunks(n.max(1)).map(|c| c.to_vec()).take(r).collect();
    Ok(TridiagonalEigen { values, rows })
}

/// Implicit QL with Wilkinson-type shifts (EISPACK `tql2` lineage).
///
/// `e[i]` couples `i` and `i+1`; `e[n-1]` must be zero on entry. `z` holds `r`
/// rows of length `n`; rotations are applied to its columns.
fn implicit_ql(
    d: &mut [f64],
    e: &mut [f64],
    z: &mut [f64],
    r: usize,
    mut log: Option<&mut RotationLog>,
) -> Result<(), SolverError> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return Err(SolverError::EigenNotConverged { index: l });
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut rr = p.hypot(1.0);
                if p < 0.0 {
                    rr = -rr;
                }
                d[l] = e[l] / (p + rr);
                d[l + 1] = e[l] * (p + rr);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                if let Some(log) = log.as_deref_mut() {
                    log.sweeps.push((l as u32, m as u32));
                }
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    rr = p.hypot(e[i]);
                    e[i + 1] = s * rr;
                    s = e[i] / rr;
                    c = p / rr;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(log) = log.as_deref_mut() {
                        log.cs.push([c, s]);
                    }
                    for t in 0..r {
                        let row = &mut z[t * n..(t + 1) * n];
                        let hz = row[i + 1];
                        row[i + 1] = s * row[i] + c * hz;
                        row[i] = c * row[i] - s * hz;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Givens rotations of one QL run, in application order. Sweep `(l, m)`
/// contributes rotations on `(i, i+1)` for `i = m−1` down to `l`.
#[derive(Debug, Clone, Default)]
struct RotationLog {
    sweeps: Vec<(u32, u32)>,
    cs: Vec<[f64; 2]>,
}

/// Eigendecomposition of a symmetric tridiagonal matrix `H = V Λ Vᵀ` with
/// `V` kept as its product of Givens rotations.
///
/// Applying `f(H)` to a vector costs one pass over the rotations, `O(n²)` in
/// total, instead of the `O(n³)` needed to form `V`.
#[derive(Debug, Clone)]
pub struct ImplicitTridiagonalEigen {
    values: Vec<f64>,
    order: Vec<usize>,
    log: RotationLog,
}

impl ImplicitTridiagonalEigen {
    pub fn new(diag: &[f64], off: &[f64]) -> Result<Self, SolverError> {
        let n = diag.len();
        assert!(n == 0 || off.len() + 1 == n, "off-diagonal length must be n-1");
        let mut d = diag.to_vec();
        let mut e = vec![0.0; n];
        e[..n.saturating_sub(1)].copy_from_slice(off);
        let mut log = RotationLog::default();
        implicit_ql(&mut d, &mut e, &mut [], 0, Some(&mut log))?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
        Ok(ImplicitTridiagonalEigen { values: d, order, log })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Eigenvalues in ascending order.
    pub fn sorted_values(&self) -> Vec<f64> {
        self.order.iter().map(|&i| self.values[i]).collect()
    }

    fn for_each_rotation(&self, reverse: bool, mut f: impl FnMut(usize, f64, f64)) {
        let mut offsets = Vec::with_capacity(self.log.sweeps.len());
        let mut off = 0;
        for &(l, m) in &self.log.sweeps {
            offsets.push(off);
            off += (m - l) as usize;
        }
        let sweeps = self.log.sweeps.iter().zip(offsets);
        let mut run = |(&(l, m), off): (&(u32, u32), usize)| {
            let (l, m) = (l as usize, m as usize);
            let len = m - l;
            for t in 0..len {
                let t = if reverse { len - 1 - t } else { t };
                let [c, s] = self.log.cs[off + t];
                f(m - 1 - t, c, s);
            }
        };
        if reverse {
            sweeps.rev().for_each(&mut run);
        } else {
            sweeps.for_each(&mut run);
        }
    }

    /// `v ← Vᵀ v` (coefficients in unsorted QL order).
    fn to_eigenbasis(&self, v: &mut [f64]) {
        self.for_each_rotation(false, |i, c, s| {
            let (a, b) = (v[i], v[i + 1]);
            v[i] = c * a - s * b;
            v[i + 1] = s * a + c * b;
        });
    }

    /// `v ← V v`.
    fn from_eigenbasis(&self, v: &mut [f64]) {
        self.for_each_rotation(true, |i, c, s| {
            let (a, b) = (v[i], v[i + 1]);
            v[i] = c * a + s * b;
            v[i + 1] = -s * a + c * b;
        });
    }

    /// `V diag(w) Vᵀ v` where `w = weight(λ, rank)` and `rank` is the position
    /// of `λ` in ascending order.
    pub fn apply(&self, v: &[f64], weight: impl Fn(f64, usize) -> f64) -> Vec<f64> {
        assert_eq!(v.len(), self.len());
        let mut rank = vec![0; self.len()];
        for (r, &i) in self.order.iter().enumerate() {
            rank[i] = r;
        }
        let mut y = v.to_vec();
        self.to_eigenbasis(&mut y);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi *= weight(self.values[i], rank[i]);
        }
        self.from_eigenbasis(&mut y);
        y
    }

    /// Coefficients `⟨v, φ_i⟩` in ascending eigenvalue order.
    pub fn coefficients(&self, v: &[f64]) -> Vec<f64> {
        let mut y = v.to_vec();
        self.to_eigenbasis(&mut y);
        self.order.iter().map(|&i| y[i]).collect()
    }

    /// Unit eigenvector for the `rank`-th smallest eigenvalue.
    pub fn eigenvector(&self, rank: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.len()];
        v[self.order[rank]] = 1.0;
        self.from_eigenbasis(&mut v);
        v
    }

    /// Number of stored rotations.
    pub fn rotation_count(&self) -> usize {
        self.log.cs.len()
    }
}

fn sort_pairs(d: Vec<f64>, z: &[f64], r: usize) -> (Vec<f64>, Vec<f64>) {
    let n = d.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&i| d[i]).collect();
    let mut zs = vec![0.0; r * n];
    for t in 0..r {
        for (new, &old) in order.iter().enumerate() {
            zs[t * n + new] = z[t * n + old];
        }
    }
    (values, zs)
}

/// Full eigendecomposition of a dense symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub n: usize,
    /// Ascending.
    pub values: Vec<f64>,
    /// Row-major `n×n`; column `i` is the eigenvector for `values[i]`.
    pub vectors: Vec<f64>,
}

impl SymmetricEigen {
    pub fn vector(&self, i: usize) -> Vec<f64> {
        (0..self.n).map(|k| self.vectors[k * self.n + i]).collect()
    }
}

/// Dense symmetric eigendecomposition: Householder tridiagonalization then
/// implicit QL. `a` is row-major `n×n` and only its lower triangle is read.
pub fn symmetric_eigen(a: &[f64], n: usize) -> Result<SymmetricEigen, SolverError> {
    assert_eq!(a.len(), n * n);
    if n == 0 {
        return Ok(SymmetricEigen {
            n,
            values: vec![],
            vectors: vec![],
        });
    }
    let mut v = a.to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    householder_tridiagonalize(&mut v, &mut d, &mut e, n);
    // Householder leaves e[i] coupling (i-1, i); QL wants (i, i+1).
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    implicit_ql(&mut d, &mut e, &mut v, n, None)?;
    let (values, vectors) = sort_pairs(d, &v, n);
    Ok(SymmetricEigen { n, values, vectors })
}

/// Eigenvalues only (ascending).
pub fn symmetric_eigenvalues(a: &[f64], n: usize) -> Result<Vec<f64>, SolverError> {
    if n == 0 {
        return Ok(vec![]);
    }
    let mut v = a.to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    householder_tridiagonalize(&mut v, &mut d, &mut e, n);
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    implicit_ql(&mut d, &mut e, &mut [], 0, None)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// EISPACK `tred2`: on exit `v` holds the accumulated orthogonal transform,
/// `d` the diagonal and `e[1..]` the sub-diagonal.
fn householder_tridiagonalize(v: &mut [f64], d: &mut [f64], e: &mut [f64], n: usize) {
    let at = |i: usize, j: usize| i * n + j;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}
