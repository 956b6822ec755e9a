//! TOML run configuration and dotted `key=value` overrides.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::{weighted_norms, DiagnosticsSpec, NormKind};
use crate::error::{Error, Result};
use crate::field::{Grid, WaveField};
use crate::fit::log_space;
use crate::nls::{EvolutionConfig, NonlinearitySpec};
use crate::propagator::DEFAULT_GUARD;
use crate::sigma::{Regularization, SigmaModel, SigmaTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub sigma: SigmaSection,
    #[serde(default)]
    pub nonlinearity: NonlinearitySection,
    pub grid: GridSection,
    #[serde(default)]
    pub initial: InitialSection,
    pub time: TimeSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub expect: Vec<Expectation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaSection {
    /// `zero`, `constant`, `inverse-square` or `table`.
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regularization: Option<String>,
    /// CSV with `t,sigma` rows; relative paths resolve against the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
}

impl SigmaSection {
    /// Builds the model, rejecting keys that the chosen kind does not use.
    pub fn model(&self) -> Result<SigmaModel> {
        let s = self;
        let unused = |key: &str, present: bool| -> Result<()> {
            if present {
                Err(Error::Parse(format!("sigma.{key} is not used by model '{}'", s.model)))
            } else {
                Ok(())
            }
        };
        match s.model.as_str() {
            "zero" => {
                unused("value", s.value.is_some())?;
                unused("k", s.k.is_some())?;
                unused("regularization", s.regularization.is_some())?;
                unused("table", s.table.is_some())?;
                Ok(SigmaModel::Zero)
            }
            "constant" => {
                unused("k", s.k.is_some())?;
                unused("regularization", s.regularization.is_some())?;
                unused("table", s.table.is_some())?;
                let c = s.value.ok_or_else(|| Error::Parse("sigma.value is required for model 'constant'".into()))?;
                Ok(SigmaModel::Constant(c))
            }
            "inverse-square" => {
                unused("value", s.value.is_some())?;
                unused("table", s.table.is_some())?;
                let k = s.k.ok_or_else(|| Error::Parse("sigma.k is required for model 'inverse-square'".into()))?;
                let reg = match &s.regularization {
                    Some(r) => Regularization::parse(r)?,
                    None => Regularization::default(),
                };
                SigmaModel::inverse_square_with(k, reg)
            }
            "table" => {
                unused("value", s.value.is_some())?;
                unused("k", s.k.is_some())?;
                unused("regularization", s.regularization.is_some())?;
                let path = s.table.as_ref().ok_or_else(|| Error::Parse("sigma.table is required for model 'table'".into()))?;
                Ok(SigmaModel::Tabulated(SigmaTable::from_csv_path(path)?))
            }
            other => Err(Error::Parse(format!("unknown sigma model '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearitySection {
    #[serde(default)]
    pub nu: f64,
    #[serde(default)]
    pub mu: f64,
    #[serde(default = "default_rho_l")]
    pub rho_l: f64,
    #[serde(default = "default_rho_s")]
    pub rho_s: f64,
}

fn default_rho_l() -> f64 {
    2.0
}

fn default_rho_s() -> f64 {
    3.0
}

impl Default for NonlinearitySection {
    fn default() -> Self {
        Self { nu: 0.0, mu: 0.0, rho_l: default_rho_l(), rho_s: default_rho_s() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "one")]
    pub dim: usize,
    pub points: usize,
    pub half_width: f64,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    /// `gaussian` or `zero`.
    #[serde(default = "gaussian")]
    pub kind: InitialKind,
    #[serde(default = "unit")]
    pub width: f64,
    #[serde(default)]
    pub center: f64,
    #[serde(default)]
    pub momentum: f64,
    /// Peak amplitude. Mutually exclusive with `epsilon`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    /// Target for `‖u₀‖_{1,0} + ‖u₀‖_{0,1}`; the amplitude is solved for.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    Gaussian,
    Zero,
}

fn gaussian() -> InitialKind {
    InitialKind::Gaussian
}

fn unit() -> f64 {
    1.0
}

impl Default for InitialSection {
    fn default() -> Self {
        Self { kind: InitialKind::Gaussian, width: 1.0, center: 0.0, momentum: 0.0, amplitude: None, epsilon: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    Log,
    Linear,
}

/// How snapshots are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeMode {
    /// Strang splitting from `t = 0`.
    SplitStep,
    /// Exact factorized linear propagator at each sample; linear runs only.
    Propagator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "unit")]
    pub r0: f64,
    /// Number of diagnostic samples on `[r0, t_end]`.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "log_spacing")]
    pub spacing: Spacing,
    /// Explicit sample times; replaces `samples`/`spacing` when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(default = "split_step")]
    pub mode: TimeMode,
    #[serde(default = "default_classical_tol")]
    pub classical_tol: f64,
}

fn default_dt() -> f64 {
    1e-3
}

fn default_samples() -> usize {
    100
}

fn log_spacing() -> Spacing {
    Spacing::Log
}

fn split_step() -> TimeMode {
    TimeMode::SplitStep
}

fn default_classical_tol() -> f64 {
    1e-12
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSection {
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Window for Cauchy-rate and splitting fits.
    #[serde(default = "default_fit_window")]
    pub fit_window: [f64; 2],
    /// Window for the `‖u‖_∞` decay fit; defaults to `fit_window`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay_window: Option<[f64; 2]>,
    #[serde(default = "default_guard")]
    pub guard: f64,
    /// Number of field, profile and phase snapshots written to disk.
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
    /// Also integrate at `dt/2` and `dt/4` and report the error ratio.
    #[serde(default)]
    pub self_convergence: bool,
}

fn default_gamma() -> f64 {
    1.5
}

fn default_alpha() -> f64 {
    0.4
}

fn default_fit_window() -> [f64; 2] {
    [10.0, 100.0]
}

fn default_guard() -> f64 {
    DEFAULT_GUARD
}

fn default_snapshots() -> usize {
    8
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        Self {
            gamma: default_gamma(),
            alpha: default_alpha(),
            fit_window: default_fit_window(),
            decay_window: None,
            guard: default_guard(),
            snapshots: default_snapshots(),
            self_convergence: false,
        }
    }
}

/// A checkable claim about a run, evaluated into the summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Expectation {
    /// Slope of `log‖u‖_∞` vs `log t` within `rel_tol` of `target`.
    DecaySlopeT { target: f64, rel_tol: f64 },
    /// Slope of `log‖u‖_∞` vs `log(1+|ζ₂|)` within `rel_tol` of `target`.
    DecaySlopeZeta2 { target: f64, rel_tol: f64 },
    /// Corrected Cauchy slope at most `max`.
    CauchyCorrectedMax { norm: NormChoice, max: f64 },
    /// Uncorrected Cauchy slope at most `max`.
    CauchyUncorrectedMax { norm: NormChoice, max: f64 },
    /// Uncorrected minus corrected slope at least `gap`.
    CauchyGapMin { norm: NormChoice, gap: f64 },
    MassDriftMax { max: f64 },
    /// Relative drift of the pseudo-energy norm over the samples.
    PseudoEnergyDriftMax { max: f64 },
    /// `(1+|ζ₂|)^{n/2}‖u‖_∞` stays below `factor` times its first value, and
    /// its log-log slope on `t ≥ tail_from` lies in `[slope_lo, slope_hi]`.
    Envelope { factor: f64, tail_from: f64, slope_lo: f64, slope_hi: f64 },
    /// Slope of the splitting main term matches `−δ₀α` within `rel_tol`.
    SplitRate { rel_tol: f64 },
    /// Error ratio between successive halvings of `dt` lies in `[lo, hi]`.
    SelfConvergence { lo: f64, hi: f64 },
    /// The run reaches `t_end` without a numerical failure.
    Completes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormChoice {
    L2,
    Linf,
}

impl NormChoice {
    pub fn kind(&self) -> NormKind {
        match self {
            NormChoice::L2 => NormKind::L2,
            NormChoice::Linf => NormKind::Linf,
        }
    }
}

impl Expectation {
    pub fn label(&self) -> String {
        match self {
            Expectation::DecaySlopeT { .. } => "decay-slope-t".into(),
            Expectation::DecaySlopeZeta2 { .. } => "decay-slope-zeta2".into(),
            Expectation::CauchyCorrectedMax { norm, .. } => format!("cauchy-corrected-max[{}]", norm.kind().name()),
            Expectation::CauchyUncorrectedMax { norm, .. } => {
                format!("cauchy-uncorrected-max[{}]", norm.kind().name())
            }
            Expectation::CauchyGapMin { norm, .. } => format!("cauchy-gap-min[{}]", norm.kind().name()),
            Expectation::MassDriftMax { .. } => "mass-drift-max".into(),
            Expectation::PseudoEnergyDriftMax { .. } => "pseudo-energy-drift-max".into(),
            Expectation::Envelope { .. } => "envelope".into(),
            Expectation::SplitRate { .. } => "split-rate".into(),
            Expectation::SelfConvergence { .. } => "self-convergence".into(),
            Expectation::Completes => "completes".into(),
        }
    }
}

/// Everything a run needs, resolved from a [`RunConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedRun {
    pub evolution: EvolutionConfig,
    pub diagnostics: DiagnosticsSpec,
    pub decay_window: (f64, f64),
    pub mode: TimeMode,
    pub classical_tol: f64,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Reads a config file; a relative sigma table path is made absolute.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Some(table) = cfg.sigma.table.as_mut() {
            if table.is_relative() {
                if let Some(dir) = path.parent() {
                    *table = dir.join(&*table);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Applies `section.key=value` overrides. The value is parsed as a TOML
    /// value and falls back to a bare string. Unknown keys are rejected.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut table: toml::Table = toml::from_str(&self.to_toml_string()).map_err(|e| Error::Parse(e.to_string()))?;
        for item in overrides {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("override '{item}' is not of the form key=value")))?;
            set_dotted(&mut table, key.trim(), parse_value(raw.trim()))?;
        }
        let text = toml::to_string(&table).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_toml_str(&text)
    }

    /// Stable digest of the canonical serialization.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        hex::encode(digest)
    }

    pub fn sigma_model(&self) -> Result<SigmaModel> {
        self.sigma.model()
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.dim, self.grid.points, self.grid.half_width)
    }

    pub fn initial_field(&self) -> Result<WaveField> {
        let grid = self.grid()?;
        let init = &self.initial;
        if init.kind == InitialKind::Zero {
            return Ok(WaveField::zeros(grid));
        }
        if !(init.width > 0.0) {
            return Err(Error::InvalidParameter(format!("initial.width must be positive, got {}", init.width)));
        }
        let base = WaveField::gaussian(grid, init.width, init.center, init.momentum);
        let amplitude = match (init.amplitude, init.epsilon) {
            (Some(_), Some(_)) => {
                return Err(Error::Parse("initial.amplitude and initial.epsilon are mutually exclusive".into()))
            }
            (Some(a), None) => a,
            (None, Some(eps)) => {
                let w = weighted_norms(&base, 1.0);
                eps / (w.h_gamma0 + w.h_0gamma)
            }
            (None, None) => 1.0,
        };
        Ok(base.scaled(Complex64::new(amplitude, 0.0)))
    }

    pub fn sample_times(&self) -> Result<Vec<f64>> {
        let t = &self.time;
        if let Some(times) = &t.times {
            return Ok(times.clone());
        }
        if t.samples < 2 {
            return Err(Error::InvalidParameter("time.samples must be at least 2".into()));
        }
        let lo = t.r0;
        if !(t.t_end > lo) {
            return Err(Error::InvalidParameter(format!("time.t_end = {} must exceed r0 = {lo}", t.t_end)));
        }
        let mut times = match t.spacing {
            Spacing::Log => {
                if !(lo > 0.0) {
                    return Err(Error::InvalidParameter("log spacing needs r0 > 0".into()));
                }
                log_space(lo, t.t_end, t.samples)
            }
            Spacing::Linear => {
                let step = (t.t_end - lo) / (t.samples - 1) as f64;
                (0..t.samples).map(|k| lo + step * k as f64).collect()
            }
        };
        // Pin the endpoints exactly so the last sample coincides with t_end.
        times[0] = lo;
        *times.last_mut().unwrap() = t.t_end;
        Ok(times)
    }

    pub fn resolve(&self) -> Result<ResolvedRun> {
        let model = self.sigma_model()?;
        let nl = &self.nonlinearity;
        let spec = NonlinearitySpec::new(nl.nu, nl.mu, nl.rho_l, nl.rho_s)?;
        let initial = self.initial_field()?;
        let mut evolution = EvolutionConfig::new(model, spec, initial, self.time.t_end, self.time.dt)
            .with_times(self.sample_times()?);
        evolution.r0 = self.time.r0;
        evolution.guard = self.diagnostics.guard;
        evolution.validate()?;
        if self.time.mode == TimeMode::Propagator && !spec.is_linear() {
            return Err(Error::InvalidParameter("time.mode = 'propagator' needs a linear run".into()));
        }
        let d = &self.diagnostics;
        let diagnostics = DiagnosticsSpec {
            gamma: d.gamma,
            alpha_holder: d.alpha,
            r0: self.time.r0,
            fit_window: (d.fit_window[0], d.fit_window[1]),
        };
        diagnostics.validate(self.grid.dim)?;
        let dw = d.decay_window.unwrap_or(d.fit_window);
        if !(self.time.classical_tol > 0.0) {
            return Err(Error::InvalidParameter("time.classical_tol must be positive".into()));
        }
        Ok(ResolvedRun {
            evolution,
            diagnostics,
            decay_window: (dw[0], dw[1]),
            mode: self.time.mode,
            classical_tol: self.time.classical_tol,
        })
    }
}

fn parse_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&wrapped) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Parse(format!("malformed override key '{key}'")));
    }
    let (leaf, path) = parts.split_last().unwrap();
    let mut cur = table;
    for p in path {
        cur = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Parse(format!("override key '{key}': '{p}' is not a section")))?;
    }
    // Integers written for float fields are accepted by promoting them.
    let value = match (cur.get(*leaf), value) {
        (Some(toml::Value::Float(_)), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
        (_, v) => v,
    };
    cur.insert(leaf.to_string(), value);
    Ok(())
}
