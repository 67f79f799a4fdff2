//! Averaging kernels `μ_L` and filtered averages over `K_L`.
//!
//! A filter of order `q` vanishes together with its first `q − 1`
//! derivatives at `±1/2`, which makes averages of periodic functions
//! converge like `L^{−(q+1)}`.

use thiserror::Error;

use crate::grid::{commensurate_cells, Grid, GridFunction};

/// Panels of the composite trapezoid rule that fixes the normalization.
const NORMALIZATION_PANELS: usize = 1 << 16;

pub const MAX_POLYNOMIAL_ORDER: u32 = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FilterError {
    #[error("filter order {0} exceeds {MAX_POLYNOMIAL_ORDER}")]
    OrderOutOfRange(u32),
    #[error("averaging box L = {l} must satisfy 0 < L < R = {r}")]
    BoxSize { l: f64, r: f64 },
    #[error("averaging box L = {l} is not commensurate with the grid (n_per_unit = {n})")]
    Incommensurate { l: f64, n: usize },
    #[error("vector of length {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterOrder {
    Finite(u32),
    Infinite,
}

impl FilterOrder {
    /// Numeric order for reports; `None` for the infinite-order bump.
    pub fn as_finite(self) -> Option<u32> {
        match self {
            FilterOrder::Finite(q) => Some(q),
            FilterOrder::Infinite => None,
        }
    }
}

impl std::fmt::Display for FilterOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FilterOrder::Finite(q) => write!(f, "{q}"),
            FilterOrder::Infinite => f.write_str("inf"),
        }
    }
}

/// A unit-mass kernel on `[−1/2, 1/2]`, zero outside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Filter {
    order: FilterOrder,
    scale: f64,
}

impl Filter {
    fn with_profile(order: FilterOrder) -> Self {
        let mut f = Filter { order, scale: 1.0 };
        f.scale = 1.0 / f.trapezoid_mass(NORMALIZATION_PANELS);
        f
    }

    pub fn order(&self) -> FilterOrder {
        self.order
    }

    /// Normalization constant multiplying the raw profile.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    fn profile(&self, x: f64) -> f64 {
        if x.abs() > 0.5 {
            return 0.0;
        }
        match self.order {
            FilterOrder::Finite(0) => 1.0,
            FilterOrder::Finite(q) => (0.25 - x * x).powi(q as i32),
            FilterOrder::Infinite => {
                let s = 1.0 - 2.0 * x.abs();
                if s <= 0.0 {
                    0.0
                } else {
                    (-2.0 / s).exp()
                }
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.scale * self.profile(x)
    }

    /// Composite trapezoid approximation of `∫ μ` with `panels` panels.
    pub fn trapezoid_mass(&self, panels: usize) -> f64 {
        let h = 1.0 / panels as f64;
        let inner: f64 = (1..panels).map(|i| self.eval(-0.5 + i as f64 * h)).sum();
        h * (inner + 0.5 * (self.eval(-0.5) + self.eval(0.5)))
    }

    /// `μ_L(x) = L^{−d} Π μ(x_i / L)`.
    pub fn eval_scaled(&self, x: &[f64], l: f64) -> f64 {
        x.iter().map(|&xi| self.eval(xi / l) / l).product()
    }
}

/// `μ(x) = c_q (1/4 − x²)^q`; `q = 0` is the flat average.
pub fn make_polynomial_filter(q: u32) -> Result<Filter, FilterError> {
    if q > MAX_POLYNOMIAL_ORDER {
        return Err(FilterError::OrderOutOfRange(q));
    }
    Ok(Filter::with_profile(FilterOrder::Finite(q)))
}

/// `μ(x) ∝ exp(−2 / (1 − 2|x|))`, smooth with all derivatives vanishing at
/// the endpoints.
pub fn make_exponential_filter() -> Filter {
    Filter::with_profile(FilterOrder::Infinite)
}

/// Quadrature weights of the filtered average over `K_L` on a grid.
///
/// Trapezoid weights with halved end factors times `μ_L` at the nodes,
/// rescaled to unit discrete mass so constants are reproduced exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterWeights {
    entries: Vec<(usize, f64)>,
    raw_mass: f64,
}

impl FilterWeights {
    pub fn new(grid: &Grid, filter: &Filter, l: f64) -> Result<Self, FilterError> {
        if !(l > 0.0 && l < grid.r()) {
            return Err(FilterError::BoxSize { l, r: grid.r() });
        }
        let n = grid.n_per_unit();
        let inc = || FilterError::Incommensurate { l, n };
        let lcells = commensurate_cells(l, n).map_err(|_| inc())?;
        let margin = grid.cells() - lcells;
        if lcells == 0 || margin % 2 != 0 {
            return Err(inc());
        }
        let first = margin / 2;
        let h = grid.h();
        // 1D lattice indices with trapezoid weight times the 1D kernel.
        let axis: Vec<(usize, f64)> = (0..=lcells)
            .map(|t| {
                let i = first + t;
                let end = if t == 0 || t == lcells { 0.5 } else { 1.0 };
                (i, end * h * filter.eval(grid.coord(i) / l) / l)
            })
            .filter(|&(_, w)| w != 0.0)
            .collect();
        let d = grid.dim();
        let mut entries = Vec::with_capacity(axis.len().pow(d as u32));
        let mut counter = vec![0usize; d];
        'outer: loop {
            let mut idx = [0usize; 3];
            let mut w = 1.0;
            for k in 0..d {
                idx[k] = axis[counter[k]].0;
                w *= axis[counter[k]].1;
            }
            let p = grid.flat_index(&idx[..d]).expect("K_L lies inside K_R");
            entries.push((p, w));
            for c in counter.iter_mut() {
                *c += 1;
                if *c < axis.len() {
                    continue 'outer;
                }
                *c = 0;
            }
            break;
        }
        let raw_mass: f64 = entries.iter().map(|e| e.1).sum();
        for e in &mut entries {
            e.1 /= raw_mass;
        }
        Ok(FilterWeights { entries, raw_mass })
    }

    /// Discrete mass before rescaling (close to 1 for resolved filters).
    pub fn raw_mass(&self) -> f64 {
        self.raw_mass
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    /// Weighted sum of values indexed by flat grid index.
    pub fn apply(&self, values: &[f64]) -> f64 {
        self.entries.iter().map(|&(p, w)| w * values[p]).sum()
    }

    /// Weighted sum of `f(p)` over the support.
    pub fn apply_with(&self, mut f: impl FnMut(usize) -> f64) -> f64 {
        self.entries.iter().map(|&(p, w)| w * f(p)).sum()
    }
}

/// `∫_{K_L} f μ_L` by the trapezoid rule on the grid nodes.
pub fn filtered_average(f: &GridFunction, filter: &Filter, l: f64) -> Result<f64, FilterError> {
    let grid = f.grid();
    let w = FilterWeights::new(grid, filter, l)?;
    Ok(w.apply(f.values()))
}
