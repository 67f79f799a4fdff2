use std::collections::BTreeMap;

use thiserror::Error;

use super::expr::{BinOp, EvalError, Expr, Func};

/// Sampling density used when bounds are not known analytically.
pub(crate) const DEFAULT_BOUND_SAMPLES: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("coefficient is not uniformly elliptic: minimum diagonal entry {min} ≤ 0")]
    NotElliptic { min: f64 },
    #[error("unknown coefficient family `{0}`")]
    UnknownFamily(String),
    #[error("parameter `{name}`: {reason}")]
    BadParam { name: String, reason: String },
    #[error("dimension must be 1, 2 or 3, got {0}")]
    BadDimension(usize),
    #[error("expected {expected} diagonal expressions, got {got}")]
    ComponentCount { expected: usize, got: usize },
    #[error("expression uses x{used} but the field has dimension {dim}")]
    VariableBeyondDim { used: usize, dim: usize },
    #[error("point {point:?} is not on the sampling lattice of spacing 1/{samples_per_unit}")]
    OffLattice {
        point: Vec<f64>,
        samples_per_unit: usize,
    },
    #[error("samples_per_dim must be at least 8, got {0}")]
    TooFewSamples(usize),
}

/// Diagonal tensor values on a periodic lattice of the unit cell.
///
/// `values[k]` holds `a_kk` at the points `i / samples_per_unit`, axis 0
/// fastest. Lookups must land on the lattice; there is no interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledTable {
    pub samples_per_unit: usize,
    pub values: Vec<Vec<f64>>,
}

impl SampledTable {
    fn lookup(&self, k: usize, x: &[f64]) -> Result<f64, FieldError> {
        let s = self.samples_per_unit;
        let mut idx = 0;
        let mut stride = 1;
        for &xi in x {
            let t = xi * s as f64;
            let r = t.round();
            if (t - r).abs() > 1e-8 * t.abs().max(1.0) {
                return Err(FieldError::OffLattice {
                    point: x.to_vec(),
                    samples_per_unit: s,
                });
            }
            let i = (r as i64).rem_euclid(s as i64) as usize;
            idx += i * stride;
            stride *= s;
        }
        Ok(self.values[k][idx])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldKind {
    Scalar(Expr),
    Diagonal(Vec<Expr>),
    Sampled(SampledTable),
}

/// A scalar or diagonal coefficient tensor with ellipticity bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    dim: usize,
    kind: FieldKind,
    periodic: bool,
    alpha: f64,
    beta: f64,
}

fn check_dim(dim: usize) -> Result<(), FieldError> {
    if (1..=3).contains(&dim) {
        Ok(())
    } else {
        Err(FieldError::BadDimension(dim))
    }
}

impl CoefficientField {
    /// Build from user expressions: one expression gives a scalar field, `dim`
    /// expressions a diagonal one. Bounds are estimated by sampling.
    pub fn from_expressions(dim: usize, exprs: Vec<Expr>, periodic: bool) -> Result<Self, FieldError> {
        check_dim(dim)?;
        for e in &exprs {
            if e.arity() > dim {
                return Err(FieldError::VariableBeyondDim { used: e.arity(), dim });
            }
        }
        let kind = match exprs.len() {
            1 => FieldKind::Scalar(exprs.into_iter().next().unwrap()),
            n if n == dim => FieldKind::Diagonal(exprs),
            n => return Err(FieldError::ComponentCount { expected: dim, got: n }),
        };
        let mut field = CoefficientField {
            dim,
            kind,
            periodic,
            alpha: f64::NAN,
            beta: f64::NAN,
        };
        field.estimate_bounds(DEFAULT_BOUND_SAMPLES)?;
        Ok(field)
    }

    /// A periodic field given by lattice values on the unit cell.
    pub fn sampled(dim: usize, table: SampledTable) -> Result<Self, FieldError> {
        check_dim(dim)?;
        if table.values.len() != dim {
            return Err(FieldError::ComponentCount {
                expected: dim,
                got: table.values.len(),
            });
        }
        let len = table.samples_per_unit.pow(dim as u32);
        if table.samples_per_unit == 0 || table.values.iter().any(|v| v.len() != len) {
            return Err(FieldError::BadParam {
                name: "values".into(),
                reason: format!("each component needs {len} samples"),
            });
        }
        let mut field = CoefficientField {
            dim,
            kind: FieldKind::Sampled(table),
            periodic: true,
            alpha: f64::NAN,
            beta: f64::NAN,
        };
        field.estimate_bounds(8)?;
        Ok(field)
    }

    fn with_bounds(dim: usize, kind: FieldKind, alpha: f64, beta: f64) -> Self {
        CoefficientField {
            dim,
            kind,
            periodic: true,
            alpha,
            beta,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// True when `a(x)` is a multiple of the identity.
    pub fn is_scalar(&self) -> bool {
        matches!(self.kind, FieldKind::Scalar(_))
    }

    /// Diagonal entry `a_kk(x)` (zero-based `k`).
    pub fn entry(&self, k: usize, x: &[f64]) -> Result<f64, FieldError> {
        debug_assert!(k < self.dim && x.len() == self.dim);
        match &self.kind {
            FieldKind::Scalar(e) => Ok(e.eval(x)?),
            FieldKind::Diagonal(es) => Ok(es[k].eval(x)?),
            FieldKind::Sampled(t) => t.lookup(k, x),
        }
    }

    /// Min and max of the diagonal entries over the lattice `i / s` of the
    /// unit cell, stored as the field's `alpha` and `beta`.
    pub fn estimate_bounds(&mut self, samples_per_dim: usize) -> Result<(f64, f64), FieldError> {
        if samples_per_dim < 8 {
            return Err(FieldError::TooFewSamples(samples_per_dim));
        }
        let (lo, hi) = match &self.kind {
            FieldKind::Sampled(t) => t
                .values
                .iter()
                .flatten()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v))),
            _ => self.sample_range(samples_per_dim)?,
        };
        if !(lo > 0.0) {
            return Err(FieldError::NotElliptic { min: lo });
        }
        self.alpha = lo;
        self.beta = hi;
        Ok((lo, hi))
    }

    fn sample_range(&self, s: usize) -> Result<(f64, f64), FieldError> {
        let d = self.dim;
        let comps = if self.is_scalar() { 1 } else { d };
        let total = s.pow(d as u32);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut x = vec![0.0; d];
        for flat in 0..total {
            let mut r = flat;
            for xi in x.iter_mut() {
                *xi = (r % s) as f64 / s as f64;
                r /= s;
            }
            for k in 0..comps {
                let v = self.entry(k, &x)?;
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        Ok((lo, hi))
    }
}

fn param(params: &BTreeMap<String, f64>, name: &str, default: f64) -> Result<f64, FieldError> {
    let v = params.get(name).copied().unwrap_or(default);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(FieldError::BadParam {
            name: name.into(),
            reason: "must be finite".into(),
        })
    }
}

fn reject_unknown(params: &BTreeMap<String, f64>, allowed: &[&str]) -> Result<(), FieldError> {
    match params.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(FieldError::BadParam {
            name: k.clone(),
            reason: format!("not a parameter of this family (expected one of {allowed:?})"),
        }),
        None => Ok(()),
    }
}

fn amplitudes(params: &BTreeMap<String, f64>) -> Result<(f64, f64), FieldError> {
    reject_unknown(params, &["c0", "c1"])?;
    let c0 = param(params, "c0", 2.0)?;
    let c1 = param(params, "c1", 1.0)?;
    if c0 <= c1.abs() {
        return Err(FieldError::BadParam {
            name: "c0".into(),
            reason: format!("ellipticity needs c0 > |c1|, got c0={c0}, c1={c1}"),
        });
    }
    Ok((c0, c1))
}

/// `sin(2π x_k)`
fn sin2pi(k: usize) -> Expr {
    Expr::call1(
        Func::Sin,
        Expr::bin(
            BinOp::Mul,
            Expr::bin(BinOp::Mul, Expr::num(2.0), Expr::Pi),
            Expr::Var(k),
        ),
    )
}

fn affine(c0: f64, c1: f64, wave: Expr) -> Expr {
    Expr::bin(BinOp::Add, Expr::num(c0), Expr::bin(BinOp::Mul, Expr::num(c1), wave))
}

/// Periodic test coefficients with analytically known `alpha`, `beta`.
///
/// | name             | a(x)                               | dims    |
/// |------------------|------------------------------------|---------|
/// | `constant`       | `c·I`                              | 1..=3   |
/// | `sine1d`         | `c0 + c1 sin(2πx1)`                | 1..=3   |
/// | `layered2d`      | `diag(f(x1), f(x1))`, f as sine1d  | 2       |
/// | `checker-smooth` | `c0 + c1 sin(2πx1) sin(2πx2)`      | 2..=3   |
pub fn builtin_family(
    name: &str,
    params: &BTreeMap<String, f64>,
    dim: usize,
) -> Result<CoefficientField, FieldError> {
    check_dim(dim)?;
    let need_dim = |ok: bool| {
        if ok {
            Ok(())
        } else {
            Err(FieldError::BadParam {
                name: "dim".into(),
                reason: format!("family `{name}` is not defined in dimension {dim}"),
            })
        }
    };
    match name {
        "constant" => {
            reject_unknown(params, &["c"])?;
            let c = param(params, "c", 1.0)?;
            if c <= 0.0 {
                return Err(FieldError::NotElliptic { min: c });
            }
            Ok(CoefficientField::with_bounds(dim, FieldKind::Scalar(Expr::num(c)), c, c))
        }
        "sine1d" => {
            let (c0, c1) = amplitudes(params)?;
            let a = affine(c0, c1, sin2pi(0));
            Ok(CoefficientField::with_bounds(dim, FieldKind::Scalar(a), c0 - c1.abs(), c0 + c1.abs()))
        }
        "layered2d" => {
            need_dim(dim == 2)?;
            let (c0, c1) = amplitudes(params)?;
            let f = affine(c0, c1, sin2pi(0));
            Ok(CoefficientField::with_bounds(
                dim,
                FieldKind::Diagonal(vec![f.clone(), f]),
                c0 - c1.abs(),
                c0 + c1.abs(),
            ))
        }
        "checker-smooth" => {
            need_dim(dim >= 2)?;
            let (c0, c1) = amplitudes(params)?;
            let a = affine(c0, c1, Expr::bin(BinOp::Mul, sin2pi(0), sin2pi(1)));
            Ok(CoefficientField::with_bounds(dim, FieldKind::Scalar(a), c0 - c1.abs(), c0 + c1.abs()))
        }
        other => Err(FieldError::UnknownFamily(other.to_string())),
    }
}
