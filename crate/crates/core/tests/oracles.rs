use std::collections::BTreeMap;

use reshom::cell::{solve_dirichlet_cell, Backend, LinearSolver, SolveOptions};
use reshom::coeff::{builtin_family, CoefficientField};
use reshom::filters::make_polynomial_filter;
use reshom::grid::{assemble_operator, assemble_source, DiscreteOperator, Grid};
use reshom::krylov::{estimate_cd, expmv_lanczos, lanczos, partial_eigendecomposition};
use reshom::linalg::{dist2, norm2};
use reshom::study::{fit_rate, XColumn};
use reshom::upscale::{exact_reference, homogenize, truncated_homogenize, CorrectionMethod, HomogenizeParams};
use reshom_oracles::{dense_corrected_cell, dense_expmv, dirichlet_laplacian_eigenvalues, harmonic_mean_1d, DenseOracle};

fn family(name: &str, dim: usize) -> CoefficientField {
    builtin_family(name, &BTreeMap::new(), dim).unwrap()
}

fn operator(field: &CoefficientField, r: f64, n: usize) -> DiscreteOperator {
    assemble_operator(field, &Grid::new(field.dim(), r, n).unwrap()).unwrap()
}

#[test]
fn lanczos_matches_dense_exponential() {
    let f = family("checker-smooth", 2);
    let op = operator(&f, 2.0, 8);
    let g = assemble_source(&f, op.grid(), 1).unwrap();
    let dense = DenseOracle::new(op.matrix()).unwrap();
    for t in [0.05, 0.5, 2.0] {
        let dec = lanczos(op.matrix(), g.values(), 60).unwrap();
        let approx = expmv_lanczos(&dec, t).unwrap();
        let exact = dense_expmv(&dense, g.values(), t).unwrap();
        assert!(dist2(&approx, &exact) <= 1e-10 * norm2(g.values()), "T={t}");
    }
}

#[test]
fn cell_solvers_match_dense_cholesky() {
    let f = family("checker-smooth", 2);
    let op = operator(&f, 2.0, 8);
    let g = assemble_source(&f, op.grid(), 0).unwrap();
    let dense = DenseOracle::new(op.matrix()).unwrap();
    let exact = dense.solve(g.values()).unwrap();
    for backend in [Backend::Cg, Backend::Direct] {
        let opts = SolveOptions {
            backend,
            ..SolveOptions::default()
        };
        let solver = LinearSolver::new(op.matrix(), 2, &opts).unwrap();
        let sol = solve_dirichlet_cell(&op, &g, &solver, 0).unwrap();
        assert!(dist2(sol.chi.values(), &exact) <= 1e-8 * norm2(&exact), "{backend:?}");
    }
}

#[test]
fn corrected_cell_matches_dense_formula() {
    let f = family("sine1d", 1);
    let op = operator(&f, 4.0, 8);
    let g = assemble_source(&f, op.grid(), 0).unwrap();
    let dense = DenseOracle::new(op.matrix()).unwrap();
    let t = 1.5;
    let exact = dense_corrected_cell(&dense, g.values(), t).unwrap();
    let engine = reshom::cell::CorrectionEngine::prepare(
        &op,
        &reshom::cell::Correction::Spectral { n_modes: None },
    )
    .unwrap();
    let solver = LinearSolver::new(op.matrix(), 1, &SolveOptions::default()).unwrap();
    let sol = reshom::cell::solve_modified_cell(&op, &g, t, &engine, &solver, 0).unwrap();
    assert!(dist2(sol.chi.values(), &exact) <= 1e-10 * norm2(&exact));
}

#[test]
fn laplacian_spectrum_matches_closed_form() {
    let c = builtin_family("constant", &[("c".to_string(), 1.0)].into(), 1).unwrap();
    let op = operator(&c, 2.0, 8);
    let trunc = partial_eigendecomposition(op.matrix(), 5, 1).unwrap();
    let exact = dirichlet_laplacian_eigenvalues(16, 2.0);
    for (a, b) in trunc.values().iter().zip(&exact) {
        assert!((a - b).abs() <= 1e-10 * b);
    }
}

#[test]
fn periodic_reference_converges_to_harmonic_mean() {
    let f = family("sine1d", 1);
    let exact = harmonic_mean_1d(&f, 1 << 14).unwrap();
    assert!((exact - 3f64.sqrt()).abs() <= 1e-12);
    let e64 = (exact_reference(&f, 64).unwrap().get(0, 0) - exact).abs();
    let e128 = (exact_reference(&f, 128).unwrap().get(0, 0) - exact).abs();
    assert!(e128 <= 1e-4);
    let ratio = e64 / e128;
    assert!((3.5..=4.5).contains(&ratio), "{ratio}");
}

#[test]
fn layered_reference_has_closed_form() {
    let f = family("layered2d", 2);
    let a = exact_reference(&f, 64).unwrap();
    assert!((a.get(0, 0) - 3f64.sqrt()).abs() <= 1e-3);
    assert!((a.get(1, 1) - 2.0).abs() <= 1e-12);
    assert!(a.get(0, 1).abs() <= 1e-12 && a.get(1, 0).abs() <= 1e-12);
}

fn params(method: CorrectionMethod) -> HomogenizeParams {
    HomogenizeParams::new(8.0, 4.0, 4.0, make_polynomial_filter(3).unwrap(), 16, method)
}

#[test]
fn truncation_limits() {
    let f = family("sine1d", 1);
    let n = operator(&f, 8.0, 16).len();
    let full = homogenize(&f, &params(CorrectionMethod::Spectral { n_modes: None })).unwrap();
    let all = truncated_homogenize(&f, &params(CorrectionMethod::None), n).unwrap();
    assert!((all.get(0, 0) - full.get(0, 0)).abs() <= 1e-12);

    let baseline = homogenize(&f, &params(CorrectionMethod::None)).unwrap();
    let none = truncated_homogenize(&f, &params(CorrectionMethod::None), 0).unwrap();
    assert!((none.get(0, 0) - baseline.get(0, 0)).abs() <= 1e-12);
}

#[test]
fn truncation_rate_follows_eigenvalue_growth() {
    let f = family("sine1d", 1);
    let full = homogenize(&f, &params(CorrectionMethod::Spectral { n_modes: None })).unwrap();
    let pts: Vec<(f64, f64)> = [1usize, 2, 4, 8]
        .iter()
        .map(|&m| {
            let a = truncated_homogenize(&f, &params(CorrectionMethod::None), m).unwrap();
            ((m * m) as f64, (a.get(0, 0) - full.get(0, 0)).abs())
        })
        .collect();
    let fit = fit_rate(&pts, XColumn::R, 0.0).unwrap();
    let c_d = estimate_cd(&operator(&f, 8.0, 16), 8).unwrap();
    let predicted = -c_d * 4.0 / 64.0;
    assert!(
        fit.slope <= predicted / 2.0 && fit.slope >= 2.0 * predicted,
        "slope {} vs {predicted}",
        fit.slope
    );
}
