use std::collections::BTreeMap;

use proptest::prelude::*;
use reshom::coeff::{builtin_family, parse_expression};
use reshom::filters::{make_polynomial_filter, FilterWeights};
use reshom::grid::{assemble_operator, Grid};
use reshom::krylov::{choose_k, expmv_adaptive, hochbruck_lubich_bound, lanczos, AdaptiveOptions};
use reshom::linalg::{dot, norm2};
use reshom::study::{fit_rate, parse_config, read_rate_csv, XColumn};

fn sine(c0: f64, c1: f64, dim: usize) -> reshom::coeff::CoefficientField {
    let name = if dim == 1 { "sine1d" } else { "checker-smooth" };
    let p: BTreeMap<String, f64> = [("c0".to_string(), c0), ("c1".to_string(), c1)].into();
    builtin_family(name, &p, dim).unwrap()
}

fn vector(len: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0f64..1.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn operator_is_bit_symmetric(c0 in 1.5f64..4.0, frac in 0.0f64..0.9, dim in 1usize..=2, r in 1u32..4, n in 2usize..6) {
        let f = sine(c0, frac * c0, dim);
        let op = assemble_operator(&f, &Grid::new(dim, r as f64, n).unwrap()).unwrap();
        let a = op.matrix();
        prop_assert!(a.iter().all(|(i, j, v)| a.get(j, i).to_bits() == v.to_bits()));
    }

    #[test]
    fn rayleigh_quotients_are_positive(c0 in 1.5f64..4.0, frac in 0.0f64..0.9, seed in vector(49)) {
        let f = sine(c0, frac * c0, 2);
        let op = assemble_operator(&f, &Grid::new(2, 2.0, 4).unwrap()).unwrap();
        prop_assume!(norm2(&seed) > 1e-6);
        prop_assert!(dot(&seed, &op.matrix().matvec(&seed)) > 0.0);
    }

    #[test]
    fn heat_semigroup_contracts(t in 0.0f64..3.0, g in vector(63)) {
        prop_assume!(norm2(&g) > 1e-6);
        let f = sine(2.0, 1.0, 1);
        let op = assemble_operator(&f, &Grid::new(1, 4.0, 16).unwrap()).unwrap();
        let opts = AdaptiveOptions { k_start: 8, k_max: 63, tol: 1e-12 };
        let (y, _) = expmv_adaptive(op.matrix(), &g, t, &opts).unwrap();
        prop_assert!(norm2(&y) <= norm2(&g) * (1.0 + 1e-12));
    }

    #[test]
    fn lanczos_basis_stays_orthonormal(g in vector(63), k in 2usize..40) {
        prop_assume!(norm2(&g) > 1e-6);
        let f = sine(2.0, 1.0, 1);
        let op = assemble_operator(&f, &Grid::new(1, 4.0, 16).unwrap()).unwrap();
        let dec = lanczos(op.matrix(), &g, k).unwrap();
        prop_assert!(dec.orthogonality_defect() <= 1e-10);
    }

    #[test]
    fn filter_weights_have_unit_mass(q in 0u32..6, l in 1u32..6, n in 4usize..24) {
        let grid = Grid::new(1, l as f64 + 2.0, n).unwrap();
        let w = FilterWeights::new(&grid, &make_polynomial_filter(q).unwrap(), l as f64).unwrap();
        let mass: f64 = w.entries().iter().map(|e| e.1).sum();
        prop_assert!((mass - 1.0).abs() <= 1e-12);
        prop_assert!(w.entries().iter().all(|e| e.1 >= 0.0));
    }

    #[test]
    fn choose_k_is_clamped(h in 1e-3f64..1.0, t in 0.0f64..50.0, c_d in 0.1f64..100.0, n in 1usize..5000) {
        let k = choose_k(h, t, c_d, n);
        prop_assert!(k <= n && (k >= 2 || n < 2));
    }

    #[test]
    fn hochbruck_lubich_bound_decreases_in_k(rho in 1.0f64..1e4, k in 1usize..200) {
        let a = hochbruck_lubich_bound(rho, k, 1.0);
        let b = hochbruck_lubich_bound(rho, k + 1, 1.0);
        prop_assert!(b <= a || a.is_infinite());
    }

    #[test]
    fn rate_fit_recovers_power_laws(p in 0.5f64..6.0, c in 1e-6f64..1e3) {
        let pts: Vec<(f64, f64)> = [2.0f64, 4.0, 8.0, 16.0].iter().map(|&r| (r, c * r.powf(-p))).collect();
        let fit = fit_rate(&pts, XColumn::LogR, 0.0).unwrap();
        prop_assert!((fit.slope + p).abs() <= 1e-9);
    }

    #[test]
    fn expression_parser_never_panics(src in "\\PC{0,40}") {
        let _ = parse_expression(&src);
    }

    #[test]
    fn expression_display_reparses(src in "[0-9x1+*/() .-]{1,24}") {
        if let Ok(e) = parse_expression(&src) {
            let again = parse_expression(&e.to_string()).unwrap();
            let (a, b) = (e.eval(&[0.3]), again.eval(&[0.3]));
            match (a, b) {
                (Ok(a), Ok(b)) => prop_assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan())),
                (a, b) => prop_assert_eq!(a.is_ok(), b.is_ok()),
            }
        }
    }

    #[test]
    fn config_parser_never_panics(src in "\\PC{0,80}") {
        let _ = parse_config(&src);
    }

    #[test]
    fn rate_csv_reader_never_panics(src in "[0-9a-zR_,.\\n-]{0,120}") {
        let _ = read_rate_csv(src.as_bytes(), "error_frob");
    }
}
