use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("time {t} lies outside the tabulated span [{lo}, {hi}]")]
    OutOfSpan { t: f64, lo: f64, hi: f64 },

    #[error("integrator step size collapsed to {step:e} at t = {t}")]
    StepSizeCollapse { t: f64, step: f64 },

    #[error("integrator exceeded {0} steps")]
    TooManySteps(usize),

    #[error("Wronskian residual {residual:e} at t = {t} exceeds budget {budget:e}")]
    WronskianBudget { t: f64, residual: f64, budget: f64 },

    #[error("time {t} is outside the solved window [{lo}, {hi}]")]
    OutsideWindow { t: f64, lo: f64, hi: f64 },

    #[error("{kind} factorization is undefined at t = {t}: {reason}")]
    FactorizationUndefined {
        kind: &'static str,
        t: f64,
        reason: String,
    },

    #[error("aliasing guard tripped during {stage}: {fraction:e} of the mass sits in the outer band")]
    Aliasing { stage: &'static str, fraction: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("Crank-Nicolson inner solve did not converge at t = {t} (residual {residual:e})")]
    InnerSolve { t: f64, residual: f64 },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
