use super::{Grid, GridError, GridFunction};
use crate::coeff::CoefficientField;
use crate::linalg::{dot, norm2, CsrMatrix};

/// The SPD matrix `A_h` of `−∇·(a∇·)` on the interior of a [`Grid`].
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    grid: Grid,
    matrix: CsrMatrix,
    diagonal: Vec<f64>,
}

impl DiscreteOperator {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn len(&self) -> usize {
        self.matrix.n()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn apply(&self, v: &GridFunction) -> Result<GridFunction, GridError> {
        if v.values().len() != self.len() {
            return Err(GridError::LengthMismatch {
                expected: self.len(),
                got: v.values().len(),
            });
        }
        GridFunction::new(self.grid, self.matrix.matvec(v.values()))
    }
}

fn check_dims(field: &CoefficientField, dim: usize) -> Result<(), GridError> {
    if field.dim() != dim {
        return Err(GridError::DimensionMismatch {
            field: field.dim(),
            grid: dim,
        });
    }
    Ok(())
}

fn positive(field: &CoefficientField, k: usize, x: &[f64]) -> Result<f64, GridError> {
    let v = field.entry(k, x)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(GridError::NotElliptic {
            value: v,
            point: x.to_vec(),
        })
    }
}

/// `a_k` at the face midpoint `x_idx ± (h/2) e_k`.
fn face(
    field: &CoefficientField,
    grid: &Grid,
    idx: &[usize; 3],
    k: usize,
    upper: bool,
    x: &mut [f64],
) -> Result<f64, GridError> {
    for (a, xa) in x.iter_mut().enumerate() {
        *xa = grid.coord(idx[a]);
    }
    let t = 2 * idx[k] as i64 + if upper { 1 } else { -1 };
    x[k] = grid.coord2(t);
    positive(field, k, x)
}

/// Flux-form five/seven-point stencil with homogeneous Dirichlet elimination.
///
/// Each face coefficient is evaluated once and written to both off-diagonal
/// entries, so the result is symmetric bit for bit.
pub fn assemble_operator(field: &CoefficientField, grid: &Grid) -> Result<DiscreteOperator, GridError> {
    check_dims(field, grid.dim())?;
    let d = grid.dim();
    let m = grid.m();
    let n = grid.len();
    let inv_h2 = (grid.n_per_unit() * grid.n_per_unit()) as f64;
    let mut trip = Vec::with_capacity(n * (1 + 4 * d));
    let mut x = vec![0.0; d];
    for p in 0..n {
        let idx = grid.multi_index(p);
        for k in 0..d {
            let w = face(field, grid, &idx, k, true, &mut x)? * inv_h2;
            trip.push((p, p, w));
            if idx[k] < m {
                let q = p + grid.stride(k);
                trip.push((p, q, -w));
                trip.push((q, p, -w));
                trip.push((q, q, w));
            }
            if idx[k] == 1 {
                let w = face(field, grid, &idx, k, false, &mut x)? * inv_h2;
                trip.push((p, p, w));
            }
        }
    }
    let matrix = CsrMatrix::from_triplets(n, trip);
    let diagonal = matrix.diagonal();
    Ok(DiscreteOperator {
        grid: *grid,
        matrix,
        diagonal,
    })
}

/// Discrete `g^j = ∇·(a e_j)` as a face difference of `a_j` along axis `j`
/// (zero-based), using exactly the face values of [`assemble_operator`].
pub fn assemble_source(field: &CoefficientField, grid: &Grid, j: usize) -> Result<GridFunction, GridError> {
    check_dims(field, grid.dim())?;
    if j >= grid.dim() {
        return Err(GridError::AxisOutOfRange { axis: j, dim: grid.dim() });
    }
    let inv_h = grid.n_per_unit() as f64;
    let mut x = vec![0.0; grid.dim()];
    let mut values = Vec::with_capacity(grid.len());
    for p in 0..grid.len() {
        let idx = grid.multi_index(p);
        let up = face(field, grid, &idx, j, true, &mut x)?;
        let down = face(field, grid, &idx, j, false, &mut x)?;
        values.push((up - down) * inv_h);
    }
    GridFunction::new(*grid, values)
}

/// Power-iteration estimate of `ρ(A_h)` from the normalized all-ones vector,
/// stopping when the Rayleigh quotient changes by less than `tol` relative.
pub fn spectral_radius(op: &DiscreteOperator, tol: f64) -> Result<f64, GridError> {
    if !(tol > 0.0 && tol <= 0.1) {
        return Err(GridError::BadTolerance(tol));
    }
    let n = op.len();
    let a = op.matrix();
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut w = vec![0.0; n];
    let cap = (100.0 / tol).ceil() as usize;
    let mut prev = f64::NAN;
    for _ in 0..cap {
        a.matvec_into(&v, &mut w);
        let rho = dot(&v, &w);
        if (rho - prev).abs() <= tol * rho.abs() {
            return Ok(rho);
        }
        prev = rho;
        let s = norm2(&w);
        if s == 0.0 {
            return Ok(0.0);
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / s;
        }
    }
    Err(GridError::PowerIterationStalled { iterations: cap, tol })
}

/// The unit cell `[0, 1)^d` with `n` nodes per axis at `i / n` and
/// wrap-around neighbours.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeriodicGrid {
    dim: usize,
    n: usize,
}

impl PeriodicGrid {
    pub fn new(dim: usize, n: usize) -> Result<Self, GridError> {
        if !(1..=3).contains(&dim) {
            return Err(GridError::BadDimension(dim));
        }
        if n < 2 {
            return Err(GridError::Empty);
        }
        Ok(PeriodicGrid { dim, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.n.pow(axis as u32)
    }

    /// 0-based lattice indices of node `p`.
    pub fn multi_index(&self, p: usize) -> [usize; 3] {
        let mut out = [0; 3];
        let mut r = p;
        for slot in out.iter_mut().take(self.dim) {
            *slot = r % self.n;
            r /= self.n;
        }
        out
    }

    /// Flat index of the neighbour of `p` one step along `axis` (`up` or down),
    /// wrapping around the cell.
    pub fn neighbour(&self, p: usize, axis: usize, up: bool) -> usize {
        let i = self.multi_index(p)[axis];
        let s = self.stride(axis);
        match (up, i) {
            (true, i) if i + 1 == self.n => p - i * s,
            (true, _) => p + s,
            (false, 0) => p + (self.n - 1) * s,
            (false, _) => p - s,
        }
    }

    pub fn point(&self, p: usize) -> Vec<f64> {
        let idx = self.multi_index(p);
        (0..self.dim).map(|k| idx[k] as f64 / self.n as f64).collect()
    }

    /// `faces[k][p]`: `a_k` on the face between `p` and its upper neighbour.
    fn faces(&self, field: &CoefficientField) -> Result<Vec<Vec<f64>>, GridError> {
        check_dims(field, self.dim)?;
        let mut x = vec![0.0; self.dim];
        let two_n = (2 * self.n) as f64;
        (0..self.dim)
            .map(|k| {
                (0..self.len())
                    .map(|p| {
                        let idx = self.multi_index(p);
                        for (a, xa) in x.iter_mut().enumerate() {
                            *xa = idx[a] as f64 / self.n as f64;
                        }
                        x[k] = (2 * idx[k] + 1) as f64 / two_n;
                        positive(field, k, &x)
                    })
                    .collect()
            })
            .collect()
    }
}

/// Flux-form operator on the periodic unit cell. Singular: constants span
/// the kernel.
pub fn assemble_periodic_operator(field: &CoefficientField, grid: &PeriodicGrid) -> Result<CsrMatrix, GridError> {
    let faces = grid.faces(field)?;
    let n = grid.len();
    let inv_h2 = (grid.n * grid.n) as f64;
    let mut trip = Vec::with_capacity(n * 4 * grid.dim);
    for (k, fk) in faces.iter().enumerate() {
        for (p, &a) in fk.iter().enumerate() {
            let w = a * inv_h2;
            let q = grid.neighbour(p, k, true);
            trip.push((p, p, w));
            trip.push((q, q, w));
            trip.push((p, q, -w));
            trip.push((q, p, -w));
        }
    }
    Ok(CsrMatrix::from_triplets(n, trip))
}

/// Periodic face-difference source along axis `j`; sums to zero up to
/// rounding because every face appears once with each sign.
pub fn assemble_periodic_source(field: &CoefficientField, grid: &PeriodicGrid, j: usize) -> Result<Vec<f64>, GridError> {
    if j >= grid.dim {
        return Err(GridError::AxisOutOfRange { axis: j, dim: grid.dim });
    }
    let faces = grid.faces(field)?;
    let fj = &faces[j];
    let inv_h = grid.n as f64;
    Ok((0..grid.len())
        .map(|p| (fj[p] - fj[grid.neighbour(p, j, false)]) * inv_h)
        .collect())
}
