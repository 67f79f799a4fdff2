//! Corrector problems on `K_R` and on the periodic unit cell.

mod correction;
mod linear;
mod parabolic;
mod periodic;

pub use correction::{Correction, CorrectionDiagnostics, CorrectionEngine, LanczosDimension};
pub use linear::{Backend, LinearSolve, LinearSolver};
pub use parabolic::{parabolic_integral, ParabolicOutcome};
pub use periodic::{
    periodic_gradient, periodic_parabolic_energy, solve_periodic_reference, PeriodicCellSolution,
    PeriodicEnergy,
};

use thiserror::Error;

use crate::grid::{DiscreteOperator, Grid, GridError, GridFunction};
use crate::krylov::KrylovError;
use crate::linalg::{CgOptions, SolverError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CellError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Krylov(#[from] KrylovError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("time horizon T = {0} must be finite and non-negative")]
    InvalidTime(f64),
    #[error("the periodic reference needs a periodic coefficient")]
    NotPeriodic,
    #[error("periodic source has mean {mean:.3e}; the cell problem is inconsistent")]
    SourceNotMeanZero { mean: f64 },
    #[error("at least 2 time steps are needed, got {0}")]
    TooFewSteps(usize),
}

/// How a [`CellSolution`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellMethod {
    Lanczos,
    Spectral,
    NoCorrection,
    ParabolicIntegral,
}

impl CellMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            CellMethod::Lanczos => "lanczos",
            CellMethod::Spectral => "spectral",
            CellMethod::NoCorrection => "none",
            CellMethod::ParabolicIntegral => "parabolic-integral",
        }
    }
}

/// Corrector `χ^j` on the interior of `K_R` with its gradient.
#[derive(Debug, Clone)]
pub struct CellSolution {
    pub chi: GridFunction,
    /// Zero-based direction `j`.
    pub direction: usize,
    pub gradient: Vec<GridFunction>,
    /// `‖A χ − rhs‖ / ‖rhs‖` (0 when the right-hand side vanishes).
    pub residual_norm: f64,
    pub iterations: usize,
    pub method: CellMethod,
    pub correction: CorrectionDiagnostics,
}

/// Options shared by the box solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub cg: CgOptions,
    pub backend: Backend,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            cg: CgOptions::default(),
            backend: Backend::Auto,
        }
    }
}

fn check_time(t: f64) -> Result<(), CellError> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(CellError::InvalidTime(t))
    }
}

fn relative_residual(op: &DiscreteOperator, x: &[f64], rhs: &[f64]) -> f64 {
    let r = crate::linalg::norm2(rhs);
    if r == 0.0 {
        return 0.0;
    }
    crate::linalg::dist2(&op.matrix().matvec(x), rhs) / r
}

/// Solves `A χ = g − e^{−TA} g` with the correction computed by `engine`.
///
/// When the right-hand side vanishes (constant coefficients, or `T = 0`) the
/// solver is skipped and `χ = 0` exactly.
pub fn solve_modified_cell(
    op: &DiscreteOperator,
    g: &GridFunction,
    t: f64,
    engine: &CorrectionEngine,
    solver: &LinearSolver,
    direction: usize,
) -> Result<CellSolution, CellError> {
    check_time(t)?;
    if g.values().len() != op.len() {
        return Err(GridError::LengthMismatch {
            expected: op.len(),
            got: g.values().len(),
        }
        .into());
    }
    let (decay, correction) = engine.apply(op, g.values(), t)?;
    let rhs: Vec<f64> = match &decay {
        Some(e) => g.values().iter().zip(e).map(|(gi, ei)| gi - ei).collect(),
        None => g.values().to_vec(),
    };
    let method = engine.method();
    finish(op, rhs, solver, direction, method, correction)
}

/// The uncorrected Dirichlet cell problem `A χ = g`.
pub fn solve_dirichlet_cell(
    op: &DiscreteOperator,
    g: &GridFunction,
    solver: &LinearSolver,
    direction: usize,
) -> Result<CellSolution, CellError> {
    solve_modified_cell(op, g, 0.0, &CorrectionEngine::none(), solver, direction)
}

fn finish(
    op: &DiscreteOperator,
    rhs: Vec<f64>,
    solver: &LinearSolver,
    direction: usize,
    method: CellMethod,
    correction: CorrectionDiagnostics,
) -> Result<CellSolution, CellError> {
    let grid = *op.grid();
    let (x, iterations, residual_norm) = if rhs.iter().all(|&v| v == 0.0) {
        (vec![0.0; op.len()], 0, 0.0)
    } else {
        let s = solver.solve(op.matrix(), &rhs, None)?;
        (s.x, s.iterations, s.rel_residual)
    };
    let chi = GridFunction::new(grid, x)?;
    let gradient = gradient(&chi);
    Ok(CellSolution {
        chi,
        direction,
        gradient,
        residual_norm,
        iterations,
        method,
        correction,
    })
}

/// Centred differences `(χ_{i+e_k} − χ_{i−e_k}) / 2h` with zero values
/// outside the interior.
pub fn gradient(chi: &GridFunction) -> Vec<GridFunction> {
    let grid: &Grid = chi.grid();
    let v = chi.values();
    let m = grid.m();
    let inv_2h = grid.n_per_unit() as f64 / 2.0;
    (0..grid.dim())
        .map(|k| {
            let s = grid.stride(k);
            let values = (0..grid.len())
                .map(|p| {
                    let i = grid.multi_index(p)[k];
                    let up = if i < m { v[p + s] } else { 0.0 };
                    let down = if i > 1 { v[p - s] } else { 0.0 };
                    (up - down) * inv_2h
                })
                .collect();
            GridFunction::new(*grid, values).expect("same grid")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::builtin_family;
    use crate::grid::{assemble_operator, assemble_source};
    use std::collections::BTreeMap;
    use std::f64::consts::PI;

    fn setup(name: &str, dim: usize, r: f64, n: usize) -> (DiscreteOperator, Vec<GridFunction>) {
        let f = builtin_family(name, &BTreeMap::new(), dim).unwrap();
        let grid = Grid::new(dim, r, n).unwrap();
        let op = assemble_operator(&f, &grid).unwrap();
        let g = (0..dim).map(|j| assemble_source(&f, &grid, j).unwrap()).collect();
        (op, g)
    }

    #[test]
    fn constant_coefficient_gives_zero_corrector() {
        let (op, g) = setup("constant", 2, 2.0, 8);
        let solver = LinearSolver::new(op.matrix(), 2, &SolveOptions::default()).unwrap();
        let engine = CorrectionEngine::prepare(&op, &Correction::Lanczos(LanczosDimension::Fixed(10))).unwrap();
        let s = solve_modified_cell(&op, &g[0], 3.0, &engine, &solver, 0).unwrap();
        assert!(s.chi.values().iter().all(|&v| v == 0.0));
        assert_eq!(s.iterations, 0);
    }

    #[test]
    fn zero_time_gives_zero_corrector() {
        let (op, g) = setup("sine1d", 1, 4.0, 16);
        let solver = LinearSolver::new(op.matrix(), 1, &SolveOptions::default()).unwrap();
        let engine = CorrectionEngine::prepare(&op, &Correction::Spectral { n_modes: None }).unwrap();
        let s = solve_modified_cell(&op, &g[0], 0.0, &engine, &solver, 0).unwrap();
        assert!(s.chi.values().iter().all(|&v| v == 0.0));
        assert!(matches!(
            solve_modified_cell(&op, &g[0], -1.0, &engine, &solver, 0),
            Err(CellError::InvalidTime(_))
        ));
    }

    #[test]
    fn large_time_matches_dirichlet() {
        let (op, g) = setup("sine1d", 1, 4.0, 16);
        let solver = LinearSolver::new(op.matrix(), 1, &SolveOptions::default()).unwrap();
        let engine = CorrectionEngine::prepare(&op, &Correction::Spectral { n_modes: None }).unwrap();
        let lam0 = engine.smallest_eigenvalue().unwrap();
        let t = 40.0 / lam0;
        let a = solve_modified_cell(&op, &g[0], t, &engine, &solver, 0).unwrap();
        let b = solve_dirichlet_cell(&op, &g[0], &solver, 0).unwrap();
        let rel = crate::linalg::dist2(a.chi.values(), b.chi.values()) / b.chi.norm();
        assert!(rel <= 1e-9, "{rel}");
        assert!(a.residual_norm <= 1e-10 && b.residual_norm <= 1e-10);
        assert_eq!(b.method, CellMethod::NoCorrection);
    }

    #[test]
    fn gradient_of_linear_and_zero_profiles() {
        let grid = Grid::new(2, 2.0, 8).unwrap();
        let lin = grid.sample(|x| 3.0 * x[0] - 2.0 * x[1]);
        let gr = gradient(&lin);
        for p in 0..grid.len() {
            let idx = grid.multi_index(p);
            if idx[..2].iter().all(|&i| i > 1 && i < grid.m()) {
                assert!((gr[0].values()[p] - 3.0).abs() < 1e-12);
                assert!((gr[1].values()[p] + 2.0).abs() < 1e-12);
            }
        }
        let z = gradient(&grid.zeros());
        assert!(z.iter().all(|g| g.values().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn gradient_is_second_order() {
        let err = |n: usize| {
            let grid = Grid::new(1, 2.0, n).unwrap();
            let chi = grid.sample(|x| (2.0 * PI * x[0]).sin());
            let gr = gradient(&chi);
            (0..grid.len())
                .map(|p| (gr[0].values()[p] - 2.0 * PI * (2.0 * PI * grid.point(p)[0]).cos()).abs())
                .fold(0.0, f64::max)
        };
        let (a, b, c) = (err(16), err(32), err(64));
        assert!((a / b).log2() >= 1.9 && (b / c).log2() >= 1.9);
    }
}
