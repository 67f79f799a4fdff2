use super::{CellError, CellMethod};
use crate::grid::DiscreteOperator;
use crate::krylov::{
    choose_k, expmv_adaptive, expmv_lanczos, hochbruck_lubich_bound, lanczos, AdaptiveOptions, SpectralBasis,
    DEFAULT_SEED,
};
use crate::linalg::norm2;

/// How the Lanczos dimension is picked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LanczosDimension {
    Fixed(usize),
    /// `k = ⌈√c_d T / 2h⌉`.
    Choose { c_d: f64 },
    /// Grow until the a-posteriori estimate is below `tol · ‖g‖`.
    Adaptive { tol: f64, k_max: Option<usize> },
}

/// Approximation of the semigroup term `e^{−TA} g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Correction {
    /// No correction: the classical Dirichlet cell problem.
    None,
    Lanczos(LanczosDimension),
    /// Lowest `n_modes` eigenmodes; `None` means all of them.
    Spectral { n_modes: Option<usize> },
}

/// What was done to evaluate the correction for one right-hand side.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorrectionDiagnostics {
    pub k_requested: Option<usize>,
    pub k_effective: Option<usize>,
    pub invariant: bool,
    pub n_modes: Option<usize>,
    pub g_norm: f64,
    /// A-priori error bound on `e^{−TA} g` when one is available.
    pub bound: Option<f64>,
    /// A-posteriori estimate relative to `‖g‖` (adaptive Lanczos only).
    pub estimate: Option<f64>,
    pub orthogonality_defect: Option<f64>,
    /// `‖e^{−TA} g‖`.
    pub decay_norm: f64,
}

/// A [`Correction`] bound to one operator, holding any eigen-information
/// that can be shared between right-hand sides.
#[derive(Debug, Clone)]
pub struct CorrectionEngine {
    correction: Correction,
    basis: Option<SpectralBasis>,
    seed: u64,
}

impl CorrectionEngine {
    pub fn none() -> Self {
        CorrectionEngine {
            correction: Correction::None,
            basis: None,
            seed: DEFAULT_SEED,
        }
    }

    pub fn prepare(op: &DiscreteOperator, correction: &Correction) -> Result<Self, CellError> {
        Self::prepare_seeded(op, correction, DEFAULT_SEED)
    }

    pub fn prepare_seeded(op: &DiscreteOperator, correction: &Correction, seed: u64) -> Result<Self, CellError> {
        let basis = match correction {
            Correction::Spectral { n_modes } => {
                let n = op.len();
                // One extra mode gives the first neglected eigenvalue.
                let want = n_modes.map_or(n, |m| (m + 1).min(n));
                if let Some(m) = n_modes {
                    if *m > n {
                        return Err(crate::krylov::KrylovError::TooManyModes { requested: *m, n }.into());
                    }
                }
                Some(SpectralBasis::new(op.matrix(), want, seed)?)
            }
            _ => None,
        };
        Ok(CorrectionEngine {
            correction: *correction,
            basis,
            seed,
        })
    }

    pub fn correction(&self) -> &Correction {
        &self.correction
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn method(&self) -> CellMethod {
        match self.correction {
            Correction::None => CellMethod::NoCorrection,
            Correction::Lanczos(_) => CellMethod::Lanczos,
            Correction::Spectral { .. } => CellMethod::Spectral,
        }
    }

    /// Smallest eigenvalue, when a spectral basis was prepared.
    pub fn smallest_eigenvalue(&self) -> Option<f64> {
        self.basis.as_ref().and_then(|b| b.values().first().copied())
    }

    pub fn basis(&self) -> Option<&SpectralBasis> {
        self.basis.as_ref()
    }

    /// `e^{−TA} g`, or `None` when no correction is applied.
    pub fn apply(
        &self,
        op: &DiscreteOperator,
        g: &[f64],
        t: f64,
    ) -> Result<(Option<Vec<f64>>, CorrectionDiagnostics), CellError> {
        let g_norm = norm2(g);
        let mut diag = CorrectionDiagnostics {
            g_norm,
            ..Default::default()
        };
        if matches!(self.correction, Correction::None) {
            return Ok((None, diag));
        }
        if g_norm == 0.0 {
            return Ok((Some(vec![0.0; g.len()]), diag));
        }
        if t == 0.0 {
            diag.decay_norm = g_norm;
            return Ok((Some(g.to_vec()), diag));
        }
        let a = op.matrix();
        let n = op.len();
        let rho = t * a.gershgorin_bound();
        let decay = match self.correction {
            Correction::None => unreachable!(),
            Correction::Lanczos(dim) => match dim {
                LanczosDimension::Fixed(_) | LanczosDimension::Choose { .. } => {
                    let k = match dim {
                        LanczosDimension::Fixed(k) => k.clamp(1, n),
                        LanczosDimension::Choose { c_d } => choose_k(op.grid().h(), t, c_d, n),
                        _ => unreachable!(),
                    };
                    let dec = lanczos(a, g, k)?;
                    diag.k_requested = Some(k);
                    diag.k_effective = Some(dec.k());
                    diag.invariant = dec.is_invariant();
                    diag.bound = Some(hochbruck_lubich_bound(rho, dec.k(), g_norm));
                    diag.orthogonality_defect = Some(dec.newest_orthogonality_defect());
                    expmv_lanczos(&dec, t)?
                }
                LanczosDimension::Adaptive { tol, k_max } => {
                    let opts = AdaptiveOptions {
                        k_start: 16,
                        k_max: k_max.unwrap_or(n),
                        tol,
                    };
                    let (y, rep) = expmv_adaptive(a, g, t, &opts)?;
                    diag.k_requested = Some(rep.k_requested);
                    diag.k_effective = Some(rep.k_effective);
                    diag.invariant = rep.invariant;
                    diag.bound = Some(rep.bound);
                    diag.estimate = Some(rep.estimate);
                    diag.orthogonality_defect = Some(rep.orthogonality_defect);
                    y
                }
            },
            Correction::Spectral { n_modes } => {
                let basis = self.basis.as_ref().expect("prepared with a basis");
                let m = n_modes.unwrap_or(n);
                diag.n_modes = Some(m);
                let vals = basis.values();
                // ‖E_N g‖ ≤ e^{−λ_N T} ‖g‖ with λ_N the first neglected eigenvalue.
                diag.bound = Some(if m >= n {
                    0.0
                } else {
                    vals.get(m).map_or(f64::INFINITY, |&l| (-l * t).exp() * g_norm)
                });
                basis.expmv(g, t, m)?
            }
        };
        diag.decay_norm = norm2(&decay);
        Ok((Some(decay), diag))
    }
}
