//! Uniform grids on `K_R = (-R/2, R/2)^d` and the flux-form operator.
//!
//! Interior nodes are `x_i = -R/2 + i h`, `i = 1..=m` per axis, with
//! `m = R n − 1`. Flat indices run with axis 0 fastest. Boundary nodes are
//! eliminated, so the unknowns are interior values only.

mod assemble;
mod market;

pub use assemble::{
    assemble_operator, assemble_periodic_operator, assemble_periodic_source, assemble_source,
    spectral_radius, DiscreteOperator, PeriodicGrid,
};
pub use market::write_matrix_market;

use thiserror::Error;

use crate::coeff::FieldError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("dimension must be 1, 2 or 3, got {0}")]
    BadDimension(usize),
    #[error("R = {r} must be at least 1")]
    BoxTooSmall { r: f64 },
    #[error("R·n_per_unit = {product} is not an integer (R = {r}, n_per_unit = {n})")]
    Incommensurate { r: f64, n: usize, product: f64 },
    #[error("grid has no interior nodes")]
    Empty,
    #[error("grid of {0} unknowns is too large")]
    TooLarge(f64),
    #[error("field has dimension {field}, grid has dimension {grid}")]
    DimensionMismatch { field: usize, grid: usize },
    #[error("axis {axis} out of range for dimension {dim}")]
    AxisOutOfRange { axis: usize, dim: usize },
    #[error("vector of length {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("coefficient entry {value} at {point:?} is not positive")]
    NotElliptic { value: f64, point: Vec<f64> },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("power iteration did not settle to {tol:.1e} in {iterations} iterations")]
    PowerIterationStalled { iterations: usize, tol: f64 },
    #[error("tolerance {0} outside (0, 0.1]")]
    BadTolerance(f64),
}

/// Number of cells per axis, i.e. `R · n_per_unit`, if it is an integer.
pub(crate) fn commensurate_cells(r: f64, n: usize) -> Result<usize, GridError> {
    let product = r * n as f64;
    let cells = product.round();
    if !product.is_finite() || (product - cells).abs() > 1e-9 * product.abs().max(1.0) {
        return Err(GridError::Incommensurate { r, n, product });
    }
    Ok(cells as usize)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    r: f64,
    n_per_unit: usize,
    cells: usize,
}

impl Grid {
    pub fn new(dim: usize, r: f64, n_per_unit: usize) -> Result<Self, GridError> {
        if !(1..=3).contains(&dim) {
            return Err(GridError::BadDimension(dim));
        }
        if !(r >= 1.0) {
            return Err(GridError::BoxTooSmall { r });
        }
        if n_per_unit == 0 {
            return Err(GridError::Empty);
        }
        let cells = commensurate_cells(r, n_per_unit)?;
        if cells < 2 {
            return Err(GridError::Empty);
        }
        let total = ((cells - 1) as f64).powi(dim as i32);
        if total > 5e8 {
            return Err(GridError::TooLarge(total));
        }
        Ok(Grid {
            dim,
            r,
            n_per_unit,
            cells,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn n_per_unit(&self) -> usize {
        self.n_per_unit
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n_per_unit as f64
    }

    /// Cells per axis (`R · n_per_unit`).
    pub fn cells(&self) -> usize {
        self.cells
    }

    /// Interior points per axis.
    pub fn m(&self) -> usize {
        self.cells - 1
    }

    /// Total number of interior unknowns `m^d`.
    pub fn len(&self) -> usize {
        self.m().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.m().pow(axis as u32)
    }

    /// Coordinate of lattice index `i` (0 and `cells` are the boundary).
    /// Half-integer positions are addressed as `coord2(2i ± 1)`.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        self.coord2(2 * i as i64)
    }

    /// Coordinate of the half-step lattice index `t`, i.e. `-R/2 + t h / 2`.
    #[inline]
    pub fn coord2(&self, t: i64) -> f64 {
        (t - self.cells as i64) as f64 / (2 * self.n_per_unit) as f64
    }

    /// Lattice indices (1-based, per axis) of the flat interior index `p`.
    pub fn multi_index(&self, p: usize) -> [usize; 3] {
        let m = self.m();
        let mut out = [0; 3];
        let mut r = p;
        for slot in out.iter_mut().take(self.dim) {
            *slot = r % m + 1;
            r /= m;
        }
        out
    }

    /// Flat index of 1-based lattice indices; `None` on the boundary.
    pub fn flat_index(&self, idx: &[usize]) -> Option<usize> {
        let m = self.m();
        let mut p = 0;
        for (axis, &i) in idx.iter().enumerate().take(self.dim) {
            if i == 0 || i > m {
                return None;
            }
            p += (i - 1) * self.stride(axis);
        }
        Some(p)
    }

    pub fn point(&self, p: usize) -> Vec<f64> {
        let idx = self.multi_index(p);
        (0..self.dim).map(|k| self.coord(idx[k])).collect()
    }

    /// Flat index of the node nearest to `x` among interior nodes, if `x`
    /// lies on the lattice.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        let mut idx = [0; 3];
        for k in 0..self.dim {
            let t = (x[k] + self.r / 2.0) * self.n_per_unit as f64;
            let i = t.round();
            if (t - i).abs() > 1e-9 * t.abs().max(1.0) || i < 0.0 {
                return None;
            }
            idx[k] = i as usize;
        }
        self.flat_index(&idx[..self.dim])
    }

    pub fn zeros(&self) -> GridFunction {
        GridFunction {
            grid: *self,
            values: vec![0.0; self.len()],
        }
    }

    /// Samples `f` at every interior node.
    pub fn sample(&self, mut f: impl FnMut(&[f64]) -> f64) -> GridFunction {
        let values = (0..self.len()).map(|p| f(&self.point(p))).collect();
        GridFunction { grid: *self, values }
    }

    pub fn function(&self, values: Vec<f64>) -> Result<GridFunction, GridError> {
        GridFunction::new(*self, values)
    }
}

/// Values at the interior nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(GridFunction { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::norm2(&self.values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn build_examples() {
        let g = Grid::new(1, 2.0, 4).unwrap();
        assert_eq!((g.h(), g.m(), g.len()), (0.25, 7, 7));
        assert_eq!(Grid::new(2, 2.0, 4).unwrap().len(), 49);
        assert!(matches!(Grid::new(2, 1.3, 4), Err(GridError::Incommensurate { .. })));
        assert!(matches!(Grid::new(4, 2.0, 4), Err(GridError::BadDimension(4))));
        assert!(matches!(Grid::new(1, 0.5, 4), Err(GridError::BoxTooSmall { .. })));
        assert!(matches!(Grid::new(1, 1.0, 1), Err(GridError::Empty)));
        assert!(Grid::new(1, 1.5, 2).is_ok());
    }

    #[test]
    fn coordinates() {
        let g = Grid::new(1, 2.0, 4).unwrap();
        assert_eq!(g.coord(0), -1.0);
        assert_eq!(g.coord(1), -0.75);
        assert_eq!(g.coord(8), 1.0);
        assert_eq!(g.coord2(3), -0.625);
        assert_eq!(g.point(3), vec![0.0]);
    }

    #[test]
    fn index_maps_are_inverse() {
        for (d, r, n) in [(1, 3.0, 3), (2, 2.0, 3), (3, 2.0, 2)] {
            let g = Grid::new(d, r, n).unwrap();
            for p in 0..g.len() {
                let idx = g.multi_index(p);
                assert_eq!(g.flat_index(&idx[..d]), Some(p));
                assert_eq!(g.locate(&g.point(p)), Some(p));
            }
            assert_eq!(g.flat_index(&[0, 1, 1][..d]), None);
            assert_eq!(g.flat_index(&[g.m() + 1, 1, 1][..d]), None);
        }
        let g = Grid::new(2, 2.0, 4).unwrap();
        assert_eq!(g.multi_index(8), [2, 2, 0]);
        assert_eq!(g.locate(&[0.1, 0.0]), None);
        assert_eq!(g.locate(&[-1.0, 0.0]), None);
    }

    #[test]
    fn grid_function_length_checked() {
        let g = Grid::new(1, 2.0, 4).unwrap();
        assert!(g.function(vec![0.0; 7]).is_ok());
        assert!(matches!(
            g.function(vec![0.0; 6]),
            Err(GridError::LengthMismatch { expected: 7, got: 6 })
        ));
    }
}
