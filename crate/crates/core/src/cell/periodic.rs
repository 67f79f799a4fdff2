use super::{check_time, CellError};
use crate::coeff::CoefficientField;
use crate::grid::{assemble_periodic_operator, assemble_periodic_source, PeriodicGrid};
use crate::linalg::{norm2, pcg, remove_mean, CgOptions};

/// Mean-zero periodic corrector on the unit cell.
#[derive(Debug, Clone)]
pub struct PeriodicCellSolution {
    pub chi: Vec<f64>,
    pub grid: PeriodicGrid,
    pub direction: usize,
    pub gradient: Vec<Vec<f64>>,
    pub residual_norm: f64,
    pub iterations: usize,
}

fn periodic_source(field: &CoefficientField, grid: &PeriodicGrid, j: usize) -> Result<Vec<f64>, CellError> {
    if !field.is_periodic() {
        return Err(CellError::NotPeriodic);
    }
    let g = assemble_periodic_source(field, grid, j)?;
    let mean = g.iter().sum::<f64>() / g.len() as f64;
    let scale = g.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    if mean.abs() > 1e-10 * scale {
        return Err(CellError::SourceNotMeanZero { mean });
    }
    Ok(g)
}

/// Solves `A χ = g^j` on the periodic unit cell with CG restricted to
/// mean-zero vectors.
pub fn solve_periodic_reference(
    field: &CoefficientField,
    n_per_unit: usize,
    j: usize,
) -> Result<PeriodicCellSolution, CellError> {
    let grid = PeriodicGrid::new(field.dim(), n_per_unit)?;
    let g = periodic_source(field, &grid, j)?;
    let a = assemble_periodic_operator(field, &grid)?;
    let opts = CgOptions {
        project_mean: true,
        ..Default::default()
    };
    let out = pcg(&a, &g, None, &opts)?;
    let gradient = periodic_gradient(&out.x, &grid);
    Ok(PeriodicCellSolution {
        chi: out.x,
        grid,
        direction: j,
        gradient,
        residual_norm: out.rel_residual,
        iterations: out.iterations,
    })
}

/// Centred differences with wrap-around.
pub fn periodic_gradient(chi: &[f64], grid: &PeriodicGrid) -> Vec<Vec<f64>> {
    let inv_2h = grid.n() as f64 / 2.0;
    (0..grid.dim())
        .map(|k| {
            (0..grid.len())
                .map(|p| (chi[grid.neighbour(p, k, true)] - chi[grid.neighbour(p, k, false)]) * inv_2h)
                .collect()
        })
        .collect()
}

/// Energy balance of the periodic heat flow `∂_t v + A v = 0`, `v(0) = g^j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicEnergy {
    /// `‖∇v‖_{L²(0,T;L²(K))}`.
    pub grad_norm: f64,
    /// `‖g‖_{L²(K)}`.
    pub g_norm: f64,
    pub alpha: f64,
    /// `‖g‖ / √(2α)`.
    pub bound: f64,
}

/// Runs the periodic heat flow with Crank–Nicolson and measures the
/// space-time gradient norm with face differences at step midpoints.
pub fn periodic_parabolic_energy(
    field: &CoefficientField,
    n_per_unit: usize,
    j: usize,
    t: f64,
    n_steps: usize,
) -> Result<PeriodicEnergy, CellError> {
    check_time(t)?;
    if n_steps < 2 {
        return Err(CellError::TooFewSteps(n_steps));
    }
    let grid = PeriodicGrid::new(field.dim(), n_per_unit)?;
    let mut v = periodic_source(field, &grid, j)?;
    remove_mean(&mut v);
    let a = assemble_periodic_operator(field, &grid)?;
    let vol = grid.h().powi(grid.dim() as i32);
    let g_norm = norm2(&v) * vol.sqrt();
    let dt = t / n_steps as f64;
    let lhs = a.shifted(1.0, 0.5 * dt);
    let opts = CgOptions {
        tol: 1e-13,
        ..Default::default()
    };
    let mut grad_sq = 0.0;
    let mut av = vec![0.0; v.len()];
    for _ in 0..n_steps {
        if norm2(&v) == 0.0 {
            break;
        }
        a.matvec_into(&v, &mut av);
        let rhs: Vec<f64> = v.iter().zip(&av).map(|(vi, ai)| vi - 0.5 * dt * ai).collect();
        let next = pcg(&lhs, &rhs, Some(&v), &opts)?.x;
        let mid: Vec<f64> = v.iter().zip(&next).map(|(a, b)| 0.5 * (a + b)).collect();
        grad_sq += dt * face_gradient_sq(&mid, &grid) * vol;
        v = next;
    }
    let alpha = field.alpha();
    Ok(PeriodicEnergy {
        grad_norm: grad_sq.sqrt(),
        g_norm,
        alpha,
        bound: g_norm / (2.0 * alpha).sqrt(),
    })
}

fn face_gradient_sq(v: &[f64], grid: &PeriodicGrid) -> f64 {
    let inv_h = grid.n() as f64;
    let mut s = 0.0;
    for k in 0..grid.dim() {
        for (p, &vp) in v.iter().enumerate() {
            let d = (v[grid.neighbour(p, k, true)] - vp) * inv_h;
            s += d * d;
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CsrMatrix;
    use crate::coeff::builtin_family;
    use std::collections::BTreeMap;
    use crate::linalg::dist2;

    fn periodic_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
        let bn = norm2(b);
        if bn == 0.0 {
            return 0.0;
        }
        dist2(&a.matvec(x), b) / bn
    }

    #[test]
    fn constant_field_has_zero_corrector() {
        let f = builtin_family("constant", &BTreeMap::new(), 2).unwrap();
        let s = solve_periodic_reference(&f, 8, 0).unwrap();
        assert!(s.chi.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sine_corrector_is_mean_zero_and_wraps() {
        let f = builtin_family("sine1d", &BTreeMap::new(), 1).unwrap();
        let s = solve_periodic_reference(&f, 64, 0).unwrap();
        let inf = s.chi.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let mean = s.chi.iter().sum::<f64>() / s.chi.len() as f64;
        assert!(mean.abs() <= 1e-12 * inf);
        assert!(s.residual_norm <= 1e-10);
        let a = assemble_periodic_operator(&f, &s.grid).unwrap();
        let g = assemble_periodic_source(&f, &s.grid, 0).unwrap();
        assert!(periodic_residual(&a, &s.chi, &g) <= 1e-10);
    }

    #[test]
    fn rejects_nonperiodic_field() {
        let e = crate::coeff::parse_expression("2 + x1/10").unwrap();
        let f = CoefficientField::from_expressions(1, vec![e], false).unwrap();
        assert!(matches!(solve_periodic_reference(&f, 8, 0), Err(CellError::NotPeriodic)));
    }

    #[test]
    fn energy_respects_the_gradient_bound() {
        let f = builtin_family("checker-smooth", &BTreeMap::new(), 2).unwrap();
        let e = periodic_parabolic_energy(&f, 16, 0, 1.0, 64).unwrap();
        assert!(e.grad_norm > 0.0);
        assert!(e.grad_norm <= 1.1 * e.bound, "{} > {}", e.grad_norm, e.bound);
    }
}
