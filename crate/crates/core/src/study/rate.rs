use std::io::Read;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RateError {
    #[error("need at least 3 rows above the floor {floor:e}, found {usable}")]
    TooFewRows { usable: usize, floor: f64 },
    #[error("CSV: {0}")]
    Csv(String),
    #[error("CSV is missing column `{0}`")]
    MissingColumn(String),
    #[error("CSV row {row}: column `{column}` is not a number: `{value}`")]
    BadNumber { row: usize, column: String, value: String },
}

/// Abscissa of the regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XColumn {
    R,
    LogR,
}

impl std::str::FromStr for XColumn {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "R" => Ok(XColumn::R),
            "logR" => Ok(XColumn::LogR),
            other => Err(format!("expected `R` or `logR`, got `{other}`")),
        }
    }
}

/// Least-squares fit of `log(error) = intercept + slope · x`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Number of points above the floor.
    pub used: usize,
}

/// Fits `(R, error)` pairs, ignoring errors at or below `floor`.
pub fn fit_rate(points: &[(f64, f64)], x: XColumn, floor: f64) -> Result<RateFit, RateError> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(r, e)| e > floor && e.is_finite() && r > 0.0)
        .map(|&(r, e)| {
            let xv = match x {
                XColumn::R => r,
                XColumn::LogR => r.ln(),
            };
            (xv, e.ln())
        })
        .collect();
    if pts.len() < 3 {
        return Err(RateError::TooFewRows {
            usable: pts.len(),
            floor,
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        used: pts.len(),
    })
}

/// Reads `(R, value)` pairs from a study CSV, skipping failure rows and
/// empty cells.
pub fn read_rate_csv<R: Read>(reader: R, column: &str) -> Result<Vec<(f64, f64)>, RateError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| RateError::Csv(e.to_string()))?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| RateError::MissingColumn(name.to_string()))
    };
    let ri = find("R")?;
    let vi = find(column)?;
    let mi = headers.iter().position(|h| h == "method");
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| RateError::Csv(e.to_string()))?;
        if mi.and_then(|m| rec.get(m)) == Some(super::FAILURE_MARKER) {
            continue;
        }
        let parse = |idx: usize, name: &str| -> Result<Option<f64>, RateError> {
            let s = rec.get(idx).unwrap_or("");
            if s.is_empty() {
                return Ok(None);
            }
            s.parse::<f64>().map(Some).map_err(|_| RateError::BadNumber {
                row: row + 1,
                column: name.to_string(),
                value: s.to_string(),
            })
        };
        if let (Some(r), Some(v)) = (parse(ri, "R")?, parse(vi, column)?) {
            out.push((r, v));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let pts: Vec<_> = [2.0, 4.0, 8.0, 16.0].iter().map(|&r: &f64| (r, r.powi(-2))).collect();
        let f = fit_rate(&pts, XColumn::LogR, 0.0).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_exponential() {
        let pts: Vec<_> = [2.0, 4.0, 8.0, 16.0].iter().map(|&r: &f64| (r, (-0.5 * r).exp())).collect();
        let f = fit_rate(&pts, XColumn::R, 0.0).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12);
    }

    #[test]
    fn floor_excludes_rows() {
        let pts = [(2.0, 1e-13), (4.0, 1e-14), (8.0, 1e-3), (16.0, 1e-4)];
        assert!(matches!(
            fit_rate(&pts, XColumn::R, 1e-12),
            Err(RateError::TooFewRows { usable: 2, .. })
        ));
    }

    #[test]
    fn reads_csv_and_skips_failures() {
        let text = "R,L,T,method,q,error_frob,error_baseline,k,N_modes,bound,cg_iters,runtime_ms\n\
                    2,1,0.1,lanczos,3,1e-2,,4,,,7,\n\
                    4,2,0.2,lanczos,3,1e-3,,6,,,9,\n\
                    8,,,failed,,,,,,,,\n";
        let rows = read_rate_csv(text.as_bytes(), "error_frob").unwrap();
        assert_eq!(rows, vec![(2.0, 1e-2), (4.0, 1e-3)]);
        assert!(read_rate_csv(text.as_bytes(), "error_baseline").unwrap().is_empty());
        assert!(matches!(
            read_rate_csv("a,b\n1,2\n".as_bytes(), "error_frob"),
            Err(RateError::MissingColumn(_))
        ));
    }

    #[test]
    fn x_column_parses() {
        assert_eq!("R".parse::<XColumn>().unwrap(), XColumn::R);
        assert_eq!("logR".parse::<XColumn>().unwrap(), XColumn::LogR);
        assert!("log".parse::<XColumn>().is_err());
    }
}
