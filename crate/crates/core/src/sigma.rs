//! Coefficient models σ(t) for the time-dependent oscillator `σ(t)|x|²/2`.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

/// How the singular `k t⁻²` profile is tamed near `t = 0`.
///
/// Both variants satisfy `t²σ(t) → k`. They differ in which solution of
/// Hill's equation `ζ₁` ends up being asymptotically:
///
/// * `Lorentzian`: `σ = k/(1+t²)`. `ζ₁` picks up a `t^{1-λ}` component, so
///   `ζ₁/ζ₂` tends to a nonzero constant.
/// * `Recessive`: `σ = λ((1-λ)t² - 1)/(1+t²)²`, chosen so that
///   `ζ₁(t) = (1+t²)^{λ/2}` exactly. `ζ₁` is the recessive `t^λ` solution and
///   `|ζ₁/ζ₂| ~ t^{-(1-2λ)}`, which the long-range asymptotics rely on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Regularization {
    Lorentzian,
    #[default]
    Recessive,
}

impl Regularization {
    pub fn name(&self) -> &'static str {
        match self {
            Regularization::Lorentzian => "lorentzian",
            Regularization::Recessive => "recessive",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "lorentzian" => Ok(Regularization::Lorentzian),
            "recessive" => Ok(Regularization::Recessive),
            other => Err(Error::Parse(format!("unknown regularization '{other}'"))),
        }
    }
}

/// Piecewise-linear σ given by samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaTable {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl SigmaTable {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidParameter(format!(
                "table has {} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::InvalidParameter(
                "table needs at least two samples".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "table times must be strictly increasing".into(),
            ));
        }
        if times.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("table contains non-finite entries".into()));
        }
        Ok(Self { times, values })
    }

    /// Reads a two-column `time,sigma` CSV. A non-numeric first line is
    /// treated as a header.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (a, b) = match (cols.next(), cols.next()) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    return Err(Error::Parse(format!(
                        "line {}: expected two columns",
                        lineno + 1
                    )))
                }
            };
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(t), Ok(s)) => {
                    times.push(t);
                    values.push(s);
                }
                _ if times.is_empty() && lineno == 0 => continue,
                _ => {
                    return Err(Error::Parse(format!(
                        "line {}: could not parse '{line}'",
                        lineno + 1
                    )))
                }
            }
        }
        Self::new(times, values)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_csv_str(&text)
    }

    pub fn span(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().unwrap())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn evaluate(&self, t: f64) -> Result<f64> {
        let (lo, hi) = self.span();
        if !(t >= lo && t <= hi) {
            return Err(Error::OutOfSpan { t, lo, hi });
        }
        let idx = self.times.partition_point(|&s| s <= t);
        if idx == 0 {
            return Ok(self.values[0]);
        }
        if idx >= self.times.len() {
            return Ok(*self.values.last().unwrap());
        }
        let (t0, t1) = (self.times[idx - 1], self.times[idx]);
        let (v0, v1) = (self.values[idx - 1], self.values[idx]);
        Ok(v0 + (v1 - v0) * (t - t0) / (t1 - t0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SigmaModel {
    Zero,
    Constant(f64),
    InverseSquare { k: f64, regularization: Regularization },
    Tabulated(SigmaTable),
}

impl SigmaModel {
    /// Inverse-square model with the default (recessive) regularization.
    pub fn inverse_square(k: f64) -> Result<Self> {
        Self::inverse_square_with(k, Regularization::default())
    }

    pub fn inverse_square_with(k: f64, regularization: Regularization) -> Result<Self> {
        if !(0.0..0.25).contains(&k) {
            return Err(Error::InvalidParameter(format!(
                "inverse-square strength k = {k} must satisfy 0 <= k < 1/4"
            )));
        }
        Ok(SigmaModel::InverseSquare { k, regularization })
    }

    /// `λ = (1 - √(1-4k))/2` for inverse-square models, `None` otherwise.
    pub fn lambda(&self) -> Option<f64> {
        match self {
            SigmaModel::InverseSquare { k, .. } => Some(inverse_square_lambda(*k)),
            SigmaModel::Zero => Some(0.0),
            _ => None,
        }
    }

    pub fn evaluate(&self, t: f64) -> Result<f64> {
        match self {
            SigmaModel::Zero => Ok(0.0),
            SigmaModel::Constant(c) => Ok(*c),
            SigmaModel::InverseSquare { k, regularization } => {
                let s = 1.0 + t * t;
                Ok(match regularization {
                    Regularization::Lorentzian => k / s,
                    Regularization::Recessive => {
                        let lam = inverse_square_lambda(*k);
                        lam * ((1.0 - lam) * t * t - 1.0) / (s * s)
                    }
                })
            }
            SigmaModel::Tabulated(table) => table.evaluate(t),
        }
    }

    /// Checks that the model can be evaluated on `[lo, hi]`.
    pub fn check_window(&self, lo: f64, hi: f64) -> Result<()> {
        if let SigmaModel::Tabulated(table) = self {
            let (a, b) = table.span();
            if lo < a {
                return Err(Error::OutOfSpan { t: lo, lo: a, hi: b });
            }
            if hi > b {
                return Err(Error::OutOfSpan { t: hi, lo: a, hi: b });
            }
        }
        Ok(())
    }
}

impl fmt::Display for SigmaModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigmaModel::Zero => write!(f, "zero"),
            SigmaModel::Constant(c) => write!(f, "constant({c})"),
            SigmaModel::InverseSquare { k, regularization } => {
                write!(f, "inverse-square(k={k}, {})", regularization.name())
            }
            SigmaModel::Tabulated(t) => write!(f, "tabulated({} samples)", t.times.len()),
        }
    }
}

pub fn inverse_square_lambda(k: f64) -> f64 {
    (1.0 - (1.0 - 4.0 * k).sqrt()) / 2.0
}
