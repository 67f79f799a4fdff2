//! Configuration-driven jobs and convergence studies.

mod config;
mod rate;

pub use config::{
    parse_config, CoefficientSpec, ConfigError, ExpmvSpec, FilterOrderSpec, FilterSpec, OneOrMany, ReferenceSpec,
    SampledSpec, StudyConfig,
};
pub use rate::{fit_rate, read_rate_csv, RateError, RateFit, XColumn};

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::cell::SolveOptions;
use crate::coeff::CoefficientField;
use crate::filters::make_polynomial_filter;
use crate::grid::{assemble_operator, assemble_source, Grid};
use crate::krylov::{
    choose_k, estimate_cd, expmv_lanczos, hochbruck_lubich_bound, lanczos, SpectralBasis, DEFAULT_SEED, DENSE_LIMIT,
};
use crate::linalg::{dist2, CgOptions};
use crate::upscale::{
    averaging_box, exact_reference, extrapolated_reference, frobenius_error, homogenize, homogenize_parabolic,
    select_parameters, CorrectionMethod, HomogenizeParams, HomogenizedTensor, UpscaleError, CD_EIGENVALUES,
};
use crate::Error;

/// `method` value of the row written when a study stops early.
pub const FAILURE_MARKER: &str = "failed";

/// Column order of study CSV files.
pub const CSV_COLUMNS: [&str; 12] = [
    "R",
    "L",
    "T",
    "method",
    "q",
    "error_frob",
    "error_baseline",
    "k",
    "N_modes",
    "bound",
    "cg_iters",
    "runtime_ms",
];

/// `(L, T)` for box size `R`: overrides win, otherwise
/// [`select_parameters`]. An explicit `T` bypasses the hypothesis check.
pub fn parameters_for(cfg: &StudyConfig, field: &CoefficientField, r: f64) -> Result<(f64, f64), UpscaleError> {
    let (c1, c2) = cfg.constants(field);
    match cfg.t {
        None => {
            let (l, t) = select_parameters(r, cfg.k_o, c1, c2, cfg.dim, cfg.n_per_unit)?;
            match cfg.l {
                Some(l_over) => {
                    crate::upscale::check_hypothesis(t, r, l_over, c2, cfg.dim)?;
                    Ok((l_over, t))
                }
                None => Ok((l, t)),
            }
        }
        Some(t) => {
            let l = match cfg.l {
                Some(l) => l,
                None => averaging_box(r, cfg.k_o, cfg.n_per_unit)?,
            };
            Ok((l, t))
        }
    }
}

fn solve_options(cfg: &StudyConfig) -> SolveOptions {
    SolveOptions {
        cg: CgOptions {
            tol: cfg.cg_tol.unwrap_or(CgOptions::default().tol),
            ..Default::default()
        },
        ..Default::default()
    }
}

fn params_for(cfg: &StudyConfig, field: &CoefficientField, r: f64) -> Result<HomogenizeParams, Error> {
    let (l, t) = parameters_for(cfg, field, r)?;
    let mut p = HomogenizeParams::new(r, l, t, cfg.filter()?, cfg.n_per_unit, cfg.method);
    p.solve = solve_options(cfg);
    p.seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    Ok(p)
}

fn reference(cfg: &StudyConfig, field: &CoefficientField) -> Result<HomogenizedTensor, Error> {
    let n = cfg.reference_resolution();
    Ok(if cfg.reference.extrapolate {
        extrapolated_reference(field, n)?
    } else {
        exact_reference(field, n)?
    })
}

fn entry_errors(a: &HomogenizedTensor, b: &HomogenizedTensor) -> Vec<f64> {
    a.entries.iter().zip(&b.entries).map(|(x, y)| (x - y).abs()).collect()
}

/// Output of [`run_job`].
#[derive(Debug, Clone, Serialize)]
pub struct JobReport {
    pub config: serde_json::Value,
    pub tensor: serde_json::Value,
    pub reference: Option<serde_json::Value>,
    pub error_frob: Option<f64>,
    pub entry_errors: Option<Vec<f64>>,
    pub baseline: Option<serde_json::Value>,
    pub error_baseline: Option<f64>,
    pub parabolic: Option<serde_json::Value>,
}

/// One homogenization at the single configured `R`, plus the periodic
/// reference when the field is periodic.
pub fn run_job(cfg: &StudyConfig, raw: &serde_json::Value) -> Result<(HomogenizedTensor, JobReport), Error> {
    let rs = cfg.r_values();
    if rs.len() != 1 {
        return Err(ConfigError::new("R", format!("a job needs exactly one box size, got {}", rs.len())).into());
    }
    let field = cfg.field()?;
    let p = params_for(cfg, &field, rs[0])?;
    let tensor = homogenize(&field, &p)?;
    let reference = if field.is_periodic() {
        Some(reference(cfg, &field)?)
    } else {
        None
    };
    let baseline = if cfg.baseline {
        Some(homogenize(&field, &baseline_params(&p))?)
    } else {
        None
    };
    let parabolic = if cfg.parabolic {
        Some(homogenize_parabolic(&field, &p, cfg.parabolic_steps)?)
    } else {
        None
    };
    let err = |t: &HomogenizedTensor| reference.as_ref().map(|r| frobenius_error(t, r)).transpose();
    let report = JobReport {
        config: raw.clone(),
        tensor: tensor.to_json(),
        reference: reference.as_ref().map(|r| r.to_json()),
        error_frob: err(&tensor)?,
        entry_errors: reference.as_ref().map(|r| entry_errors(&tensor, r)),
        baseline: baseline.as_ref().map(|b| b.to_json()),
        error_baseline: match &baseline {
            Some(b) => err(b)?,
            None => None,
        },
        parabolic: parabolic.as_ref().map(|b| b.to_json()),
    };
    Ok((tensor, report))
}

/// Only the periodic reference tensor.
pub fn run_reference(cfg: &StudyConfig) -> Result<HomogenizedTensor, Error> {
    let field = cfg.field()?;
    if !field.is_periodic() {
        return Err(ConfigError::new("coefficient.periodic", "the reference needs a periodic field").into());
    }
    reference(cfg, &field)
}

fn baseline_params(p: &HomogenizeParams) -> HomogenizeParams {
    HomogenizeParams {
        method: CorrectionMethod::None,
        filter: make_polynomial_filter(0).expect("order 0 exists"),
        ..*p
    }
}

/// One line of a study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub r: f64,
    pub l: f64,
    pub t: f64,
    pub method: String,
    pub q: String,
    pub error_frob: f64,
    pub entry_errors: Vec<f64>,
    pub error_baseline: Option<f64>,
    /// Largest Lanczos dimension over the directions.
    pub k: Option<usize>,
    pub n_modes: Option<usize>,
    /// Largest a-priori bound over the directions.
    pub bound: Option<f64>,
    pub cg_iters: usize,
    pub runtime_ms: f64,
}

impl StudyRow {
    fn from_tensor(t: &HomogenizedTensor, reference: &HomogenizedTensor, baseline: Option<f64>) -> Result<Self, Error> {
        let m = &t.meta;
        Ok(StudyRow {
            r: m.r.unwrap_or(f64::NAN),
            l: m.l.unwrap_or(f64::NAN),
            t: m.t.unwrap_or(f64::NAN),
            method: m.method.clone(),
            q: m.q.clone().unwrap_or_default(),
            error_frob: frobenius_error(t, reference)?,
            entry_errors: entry_errors(t, reference),
            error_baseline: baseline,
            k: m.k.iter().flatten().copied().max(),
            n_modes: m.n_modes,
            bound: m.bounds.iter().flatten().copied().reduce(f64::max),
            cg_iters: m.cg_iters.iter().sum(),
            runtime_ms: m.timings_ms.total,
        })
    }
}

/// Rows computed before a failure, and the failure if any.
#[derive(Debug, Clone)]
pub struct StudyOutcome {
    pub rows: Vec<StudyRow>,
    pub reference: HomogenizedTensor,
    pub failure: Option<(f64, Error)>,
}

fn study_rows(
    cfg: &StudyConfig,
    field: &CoefficientField,
    reference: &HomogenizedTensor,
    r: f64,
) -> Result<Vec<StudyRow>, Error> {
    let p = params_for(cfg, field, r)?;
    let tensor = homogenize(field, &p)?;
    let baseline = if cfg.baseline {
        Some(frobenius_error(&homogenize(field, &baseline_params(&p))?, reference)?)
    } else {
        None
    };
    let mut rows = vec![StudyRow::from_tensor(&tensor, reference, baseline)?];
    if cfg.parabolic {
        let par = homogenize_parabolic(field, &p, cfg.parabolic_steps)?;
        rows.push(StudyRow::from_tensor(&par, reference, None)?);
    }
    Ok(rows)
}

/// Sweeps the configured `R` list. Rows are ordered by `R`; the sweep stops
/// at the first failing `R`.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyOutcome, Error> {
    let field = cfg.field()?;
    if !field.is_periodic() {
        return Err(ConfigError::new("coefficient.periodic", "a study needs a periodic field").into());
    }
    let reference = reference(cfg, &field)?;
    let results: Vec<(f64, Result<Vec<StudyRow>, Error>)> = cfg
        .r_values()
        .into_par_iter()
        .map(|r| (r, study_rows(cfg, &field, &reference, r)))
        .collect();
    let mut rows = Vec::new();
    let mut failure = None;
    for (r, res) in results {
        match res {
            Ok(mut rs) => rows.append(&mut rs),
            Err(e) => {
                failure = Some((r, e));
                break;
            }
        }
    }
    Ok(StudyOutcome {
        rows,
        reference,
        failure,
    })
}

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
    v.map(f).unwrap_or_default()
}

/// Writes the study CSV; `timings = false` leaves `runtime_ms` empty so
/// that reruns are byte-identical.
pub fn write_study_csv<W: Write>(outcome: &StudyOutcome, out: W, timings: bool) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::io("csv", e);
    w.write_record(CSV_COLUMNS).map_err(io)?;
    for row in &outcome.rows {
        w.write_record([
            real(row.r),
            real(row.l),
            real(row.t),
            row.method.clone(),
            row.q.clone(),
            real(row.error_frob),
            opt(row.error_baseline, real),
            opt(row.k, |k| k.to_string()),
            opt(row.n_modes, |k| k.to_string()),
            opt(row.bound, real),
            row.cg_iters.to_string(),
            if timings { real(row.runtime_ms) } else { String::new() },
        ])
        .map_err(io)?;
    }
    if let Some((r, _)) = &outcome.failure {
        let mut rec = vec![String::new(); CSV_COLUMNS.len()];
        rec[0] = real(*r);
        rec[3] = FAILURE_MARKER.to_string();
        w.write_record(rec).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io("csv", e))?;
    Ok(())
}

/// One `(R, T)` comparison of Lanczos against the full spectral sum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpmvCheckRow {
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub k: usize,
    pub k_effective: usize,
    pub c_d: Option<f64>,
    pub g_norm: f64,
    pub error: f64,
    pub hochbruck_lubich: f64,
    /// `10 ‖g‖ e^{−T/5}`.
    pub corollary_bound: f64,
    pub orthogonality_defect: f64,
}

/// Lanczos `e^{−TA} g¹` against all eigenmodes for every configured `R`
/// and `T`.
pub fn run_expmv_check(cfg: &StudyConfig) -> Result<Vec<ExpmvCheckRow>, Error> {
    let spec = cfg
        .expmv
        .as_ref()
        .ok_or_else(|| ConfigError::new("expmv", "the expmv-check subcommand needs an `expmv` section"))?;
    let field = cfg.field()?;
    let mut rows = Vec::new();
    for r in cfg.r_values() {
        let grid = Grid::new(cfg.dim, r, cfg.n_per_unit).map_err(UpscaleError::from)?;
        let op = assemble_operator(&field, &grid).map_err(UpscaleError::from)?;
        let n = op.len();
        if cfg.dim > 1 && n > DENSE_LIMIT {
            return Err(ConfigError::new(
                "R",
                format!("full spectral reference limited to {DENSE_LIMIT} unknowns, R = {r} gives {n}"),
            )
            .into());
        }
        let g = assemble_source(&field, &grid, 0).map_err(UpscaleError::from)?;
        let basis = SpectralBasis::new(op.matrix(), n, cfg.seed.unwrap_or(DEFAULT_SEED)).map_err(UpscaleError::from)?;
        let c_d = match (spec.k, spec.c_d) {
            (Some(_), _) => None,
            (None, Some(c)) => Some(c),
            (None, None) => Some(estimate_cd(&op, CD_EIGENVALUES.min(n).max(4)).map_err(UpscaleError::from)?),
        };
        let rho = op.matrix().gershgorin_bound();
        let g_norm = g.norm();
        for &t in &spec.times {
            let k = spec.k.unwrap_or_else(|| choose_k(grid.h(), t, c_d.unwrap_or(1.0), n)).clamp(1, n);
            let exact = basis.expmv(g.values(), t, n).map_err(UpscaleError::from)?;
            let (error, k_eff, defect) = if g_norm == 0.0 {
                (0.0, 0, 0.0)
            } else {
                let dec = lanczos(op.matrix(), g.values(), k).map_err(UpscaleError::from)?;
                let y = expmv_lanczos(&dec, t).map_err(UpscaleError::from)?;
                (dist2(&y, &exact), dec.k(), dec.orthogonality_defect())
            };
            rows.push(ExpmvCheckRow {
                r,
                t,
                n,
                k,
                k_effective: k_eff,
                c_d,
                g_norm,
                error,
                hochbruck_lubich: hochbruck_lubich_bound(rho * t, k_eff.max(1), g_norm),
                corollary_bound: 10.0 * g_norm * (-t / 5.0).exp(),
                orthogonality_defect: defect,
            });
        }
    }
    Ok(rows)
}
