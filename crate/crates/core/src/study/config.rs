use std::collections::BTreeMap;

use serde::Deserialize;
use thiserror::Error;

use crate::coeff::{builtin_family, parse_expression, CoefficientField, SampledTable};
use crate::filters::{make_exponential_filter, make_polynomial_filter, Filter, MAX_POLYNOMIAL_ORDER};
use crate::upscale::{default_c1, CorrectionMethod, DEFAULT_C2};

/// A configuration problem, located by a JSON path such as `filter.q`.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            path: path.into(),
            message: message.into(),
        }
    }
}

/// Which coefficient the run uses. Exactly one of `family`, `expressions`
/// or `sampled` must be given.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSpec {
    #[serde(default)]
    pub family: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    /// One scalar expression or `dim` diagonal entries.
    #[serde(default)]
    pub expressions: Option<Vec<String>>,
    #[serde(default)]
    pub periodic: Option<bool>,
    #[serde(default)]
    pub sampled: Option<SampledSpec>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampledSpec {
    pub samples_per_unit: usize,
    pub values: Vec<Vec<f64>>,
}

/// Filter order: an integer `q` or `"inf"` for the exponential bump.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum FilterOrderSpec {
    Finite(u32),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    pub q: FilterOrderSpec,
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec {
            q: FilterOrderSpec::Finite(3),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSpec {
    /// Resolution of the periodic reference; twice the study resolution when
    /// absent.
    #[serde(default)]
    pub n_per_unit: Option<usize>,
    /// Use the Richardson-extrapolated reference for errors.
    #[serde(default)]
    pub extrapolate: bool,
}

/// Settings of the `expmv-check` subcommand.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpmvSpec {
    pub times: Vec<f64>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub c_d: Option<f64>,
}

/// Numeric list that also accepts a single number.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn values(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

fn default_ko() -> f64 {
    0.5
}

fn default_method() -> CorrectionMethod {
    CorrectionMethod::Lanczos { k: None, c_d: None }
}

fn default_steps() -> usize {
    128
}

/// One JSON document describing a job or a study.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub coefficient: CoefficientSpec,
    pub dim: usize,
    pub n_per_unit: usize,
    #[serde(rename = "R")]
    pub r: OneOrMany,
    #[serde(default = "default_ko")]
    pub k_o: f64,
    #[serde(default)]
    pub c1: Option<f64>,
    #[serde(default)]
    pub c2: Option<f64>,
    /// Overrides `L = k_o R`.
    #[serde(default, rename = "L")]
    pub l: Option<f64>,
    /// Overrides `T = k_T R`.
    #[serde(default, rename = "T")]
    pub t: Option<f64>,
    #[serde(default)]
    pub filter: FilterSpec,
    #[serde(default = "default_method")]
    pub method: CorrectionMethod,
    /// Also run the uncorrected Dirichlet problem with `q = 0`.
    #[serde(default)]
    pub baseline: bool,
    /// Also run the Crank–Nicolson time integral.
    #[serde(default)]
    pub parabolic: bool,
    #[serde(default = "default_steps")]
    pub parabolic_steps: usize,
    #[serde(default)]
    pub reference: ReferenceSpec,
    #[serde(default)]
    pub cg_tol: Option<f64>,
    #[serde(default)]
    pub expmv: Option<ExpmvSpec>,
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Parse and validate a configuration document.
pub fn parse_config(text: &str) -> Result<StudyConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: StudyConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::new(if path == "." { "(root)".to_string() } else { path }, e.into_inner().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

impl StudyConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(1..=3).contains(&self.dim) {
            return Err(ConfigError::new("dim", format!("must be 1, 2 or 3, got {}", self.dim)));
        }
        if self.n_per_unit < 2 {
            return Err(ConfigError::new("n_per_unit", "must be at least 2"));
        }
        if !(self.k_o > 0.0 && self.k_o < 1.0) {
            return Err(ConfigError::new("k_o", format!("must lie in (0, 1), got {}", self.k_o)));
        }
        let rs = self.r_values();
        if rs.is_empty() {
            return Err(ConfigError::new("R", "at least one box size is required"));
        }
        for (i, &r) in rs.iter().enumerate() {
            let cells = r * self.n_per_unit as f64;
            if !(r > 0.0) || !cells.is_finite() || (cells - cells.round()).abs() > 1e-9 * cells.max(1.0) {
                return Err(ConfigError::new(
                    format!("R[{i}]"),
                    format!("R = {r} is not commensurate with n_per_unit = {}", self.n_per_unit),
                ));
            }
            if i > 0 && r <= rs[i - 1] {
                return Err(ConfigError::new(format!("R[{i}]"), "R list must be strictly increasing"));
            }
        }
        for (name, v) in [("c1", self.c1), ("c2", self.c2)] {
            if let Some(c) = v {
                if !(c > 0.0 && c.is_finite()) {
                    return Err(ConfigError::new(name, format!("must be positive, got {c}")));
                }
            }
        }
        if let Some(t) = self.t {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(ConfigError::new("T", format!("must be finite and non-negative, got {t}")));
            }
        }
        if let Some(l) = self.l {
            if !(l > 0.0) {
                return Err(ConfigError::new("L", format!("must be positive, got {l}")));
            }
        }
        self.filter()?;
        match self.method {
            CorrectionMethod::Lanczos { k: Some(0), .. } => {
                return Err(ConfigError::new("method.k", "must be at least 1"));
            }
            CorrectionMethod::Lanczos { c_d: Some(c), .. } if !(c > 0.0) => {
                return Err(ConfigError::new("method.c_d", "must be positive"));
            }
            CorrectionMethod::LanczosAdaptive { tol, .. } if !(tol > 0.0 && tol < 1.0) => {
                return Err(ConfigError::new("method.tol", "must lie in (0, 1)"));
            }
            _ => {}
        }
        if self.parabolic && self.parabolic_steps < 2 {
            return Err(ConfigError::new("parabolic_steps", "must be at least 2"));
        }
        if let Some(tol) = self.cg_tol {
            if !(tol > 0.0 && tol < 1.0) {
                return Err(ConfigError::new("cg_tol", "must lie in (0, 1)"));
            }
        }
        if self.reference.n_per_unit == Some(0) || self.reference.n_per_unit == Some(1) {
            return Err(ConfigError::new("reference.n_per_unit", "must be at least 2"));
        }
        if let Some(e) = &self.expmv {
            if e.times.is_empty() || e.times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
                return Err(ConfigError::new("expmv.times", "need non-negative finite times"));
            }
        }
        self.field()?;
        Ok(())
    }

    pub fn r_values(&self) -> Vec<f64> {
        self.r.values()
    }

    pub fn filter(&self) -> Result<Filter, ConfigError> {
        match &self.filter.q {
            FilterOrderSpec::Finite(q) => make_polynomial_filter(*q).map_err(|_| {
                ConfigError::new("filter.q", format!("order must be at most {MAX_POLYNOMIAL_ORDER} or \"inf\""))
            }),
            FilterOrderSpec::Named(s) if s == "inf" => Ok(make_exponential_filter()),
            FilterOrderSpec::Named(s) => Err(ConfigError::new("filter.q", format!("unknown order `{s}`"))),
        }
    }

    pub fn reference_resolution(&self) -> usize {
        self.reference.n_per_unit.unwrap_or(2 * self.n_per_unit)
    }

    /// Build the coefficient field.
    pub fn field(&self) -> Result<CoefficientField, ConfigError> {
        let c = &self.coefficient;
        let given = [c.family.is_some(), c.expressions.is_some(), c.sampled.is_some()];
        if given.iter().filter(|&&g| g).count() != 1 {
            return Err(ConfigError::new(
                "coefficient",
                "give exactly one of `family`, `expressions` or `sampled`",
            ));
        }
        if let Some(name) = &c.family {
            if c.periodic == Some(false) {
                return Err(ConfigError::new("coefficient.periodic", "builtin families are periodic"));
            }
            return builtin_family(name, &c.params, self.dim).map_err(|e| ConfigError::new("coefficient", e.to_string()));
        }
        if !c.params.is_empty() {
            return Err(ConfigError::new("coefficient.params", "only used with `family`"));
        }
        if let Some(src) = &c.expressions {
            let mut exprs = Vec::with_capacity(src.len());
            for (i, s) in src.iter().enumerate() {
                let e = parse_expression(s)
                    .map_err(|e| ConfigError::new(format!("coefficient.expressions[{i}]"), e.to_string()))?;
                exprs.push(e);
            }
            return CoefficientField::from_expressions(self.dim, exprs, c.periodic.unwrap_or(true))
                .map_err(|e| ConfigError::new("coefficient.expressions", e.to_string()));
        }
        let s = c.sampled.as_ref().expect("checked above");
        if c.periodic == Some(false) {
            return Err(ConfigError::new("coefficient.periodic", "sampled tables are periodic"));
        }
        // Faces of the reference grid sit at odd multiples of 1/(2·n_ref).
        let need = 2 * self.reference_resolution().max(self.n_per_unit);
        if s.samples_per_unit == 0 || s.samples_per_unit % need != 0 {
            return Err(ConfigError::new(
                "coefficient.sampled.samples_per_unit",
                format!("must be a multiple of {need} so that every grid node and face is sampled"),
            ));
        }
        CoefficientField::sampled(
            self.dim,
            SampledTable {
                samples_per_unit: s.samples_per_unit,
                values: s.values.clone(),
            },
        )
        .map_err(|e| ConfigError::new("coefficient.sampled", e.to_string()))
    }

    /// `(c1, c2)` with defaults `α π² / d` and `0.1`.
    pub fn constants(&self, field: &CoefficientField) -> (f64, f64) {
        (
            self.c1.unwrap_or_else(|| default_c1(field.alpha(), self.dim)),
            self.c2.unwrap_or(DEFAULT_C2),
        )
    }
}
