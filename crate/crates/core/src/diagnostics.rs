//! Weighted norms, pulled-back profiles, the long-range phase correction and
//! the fits built on them.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::classical::{factor_coefficients, in_band, ClassicalSolution, DEFAULT_EXCLUSION_BAND};
use crate::error::{Error, Result};
use crate::fft::{fourier, inverse_fourier, resample};
use crate::field::{Representation, WaveField};
use crate::fit::{fit_line, LineFit};
use crate::nls::{NonlinearitySpec, Trajectory};
use crate::propagator::{pullback, DEFAULT_GUARD};

/// Differences below this are treated as converged rather than fitted.
pub const CONVERGED_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedNorms {
    pub l2: f64,
    pub linf: f64,
    /// `‖(1+|ξ|²)^{γ/2} û‖₂`.
    pub h_gamma0: f64,
    /// `‖(1+|x|²)^{γ/2} u‖₂`.
    pub h_0gamma: f64,
}

pub fn weighted_norms(field: &WaveField, gamma: f64) -> WeightedNorms {
    let h_gamma0 = if gamma == 0.0 {
        field.l2_norm()
    } else {
        weighted(&fourier(field), gamma).l2_norm()
    };
    WeightedNorms {
        l2: field.l2_norm(),
        linf: field.linf_norm(),
        h_gamma0,
        h_0gamma: weighted(field, gamma).l2_norm(),
    }
}

/// Pointwise `(1+|coordinate|²)^{γ/2}`.
fn weighted(field: &WaveField, gamma: f64) -> WaveField {
    weighted_by(field, |r| (1.0 + r).powf(gamma / 2.0))
}

/// `‖(1+α(t))^{γ/2}u‖₂` with `α(t) = (ζ₂p − ζ₂′x)²`.
///
/// Two exact conjugations are available:
/// `ζ₂p − ζ₂′x = e^{iβ|x|²}(ζ₂p)e^{−iβ|x|²}` with `β = ζ₂′/(2ζ₂)`, and
/// `ζ₂p − ζ₂′x = e^{−ib|p|²}(−ζ₂′x)e^{ib|p|²}` with `b = ζ₂/(2ζ₂′)`.
/// The first is tried whenever ζ₂ is outside the band and its dechirped
/// samples are band-limited; otherwise the second is used on the spectrum of
/// the field itself. Fields whose samples fit neither are refused.
pub fn pseudo_energy_norm(sol: &ClassicalSolution, t: f64, field: &WaveField, gamma: f64) -> Result<f64> {
    if gamma == 0.0 {
        return Ok(field.l2_norm());
    }
    let s = sol.state(t)?;
    if !in_band(s.zeta2, t, DEFAULT_EXCLUSION_BAND) {
        let beta = s.zeta2p / (2.0 * s.zeta2);
        let spec = fourier(&field.chirp(-beta));
        if spec.edge_fraction() <= DEFAULT_GUARD {
            let z2 = s.zeta2 * s.zeta2;
            return Ok(weighted_by(&spec, |r| (1.0 + z2 * r).powf(gamma / 2.0)).l2_norm());
        }
    }
    let b = s.zeta2 / (2.0 * s.zeta2p);
    let flowed = if b == 0.0 {
        field.clone()
    } else {
        let spec = fourier(field);
        let edge = spec.edge_fraction();
        if edge > DEFAULT_GUARD {
            return Err(Error::Aliasing { stage: "pseudo-energy", fraction: edge });
        }
        inverse_fourier(&spec.chirp(b))
    };
    let c2 = s.zeta2p * s.zeta2p;
    Ok(weighted_by(&flowed, |r| (1.0 + c2 * r).powf(gamma / 2.0)).l2_norm())
}

/// Pointwise multiplication by `m(|coordinate|²)`.
fn weighted_by(field: &WaveField, m: impl Fn(f64) -> f64) -> WaveField {
    let r2 = field.radius_squared();
    let mut out = field.clone();
    for (z, r) in out.samples_mut().iter_mut().zip(r2) {
        *z *= m(r);
    }
    out
}

/// `∫|u|`, used for the dispersive envelope `‖U₀(t,0)v‖_∞|ζ₂|^{n/2}/‖v‖₁`.
pub fn l1_norm(field: &WaveField) -> f64 {
    field.samples().iter().map(|z| z.norm()).sum::<f64>() * field.cell_volume()
}

/// `v̂(t) = F(U₀(0,t)u(t))`, resampled onto `(representation, scale)`.
pub fn profile_on(
    sol: &ClassicalSolution,
    t: f64,
    field: &WaveField,
    representation: Representation,
    scale: f64,
) -> Result<WaveField> {
    let v = pullback(sol, t, field)?;
    let vh = fourier(&v);
    if vh.representation() == representation && vh.scale() == scale {
        Ok(vh)
    } else {
        resample(&vh, representation, scale)
    }
}

/// Profile on the frequency layout dual to the unit position layout, i.e.
/// the layout of `F(u₀)`.
pub fn profile(sol: &ClassicalSolution, t: f64, field: &WaveField) -> Result<WaveField> {
    profile_on(sol, t, field, Representation::Frequency, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSpec {
    /// Weighted-norm exponent, `> n/2`.
    pub gamma: f64,
    /// Hölder exponent in `(0, min(γ/2 − n/4, 1))`.
    pub alpha_holder: f64,
    pub r0: f64,
    pub fit_window: (f64, f64),
}

impl Default for DiagnosticsSpec {
    fn default() -> Self {
        Self { gamma: 1.5, alpha_holder: 0.4, r0: 1.0, fit_window: (10.0, 100.0) }
    }
}

impl DiagnosticsSpec {
    pub fn validate(&self, dim: usize) -> Result<()> {
        let n = dim as f64;
        if !(self.gamma > n / 2.0) {
            return Err(Error::InvalidParameter(format!("gamma must exceed n/2 = {}, got {}", n / 2.0, self.gamma)));
        }
        let cap = (self.gamma / 2.0 - n / 4.0).min(1.0);
        if !(self.alpha_holder > 0.0 && self.alpha_holder < cap) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, {cap}), got {}",
                self.alpha_holder
            )));
        }
        if !(self.r0 >= 0.0) {
            return Err(Error::InvalidParameter(format!("r0 must be nonnegative, got {}", self.r0)));
        }
        let (lo, hi) = self.fit_window;
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::InvalidParameter(format!("fit window [{lo}, {hi}] is degenerate")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormRecord {
    pub t: f64,
    pub l2: f64,
    pub linf: f64,
    pub h_gamma0: f64,
    pub h_0gamma: f64,
    pub pseudo_energy: f64,
    pub zeta2_abs: f64,
    /// `NaN` where the splitting is undefined.
    pub main_term: f64,
    pub remainder_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSeries {
    pub times: Vec<f64>,
    pub v_hat: Vec<WaveField>,
    /// Per time, per frequency node: `ν∫|ζ₂|^{−nρ_L/2}|v̂|^{ρ_L}dτ` from the first time.
    pub accumulated_phase: Vec<Vec<f64>>,
    pub w_hat: Vec<WaveField>,
    pub norms: Vec<NormRecord>,
}

impl ProfileSeries {
    /// Diagnostics for every snapshot at or after `spec.r0`.
    pub fn from_trajectory(
        sol: &ClassicalSolution,
        traj: &Trajectory,
        nonlinearity: &NonlinearitySpec,
        spec: &DiagnosticsSpec,
    ) -> Result<Self> {
        let mut times = Vec::new();
        let mut v_hat = Vec::new();
        let mut norms = Vec::new();
        for snap in traj.snapshots.iter().filter(|s| s.t >= spec.r0) {
            let t = snap.t;
            let u = &snap.field;
            let w = weighted_norms(u, spec.gamma);
            let split = linfty_split_check(sol, t, u, spec.alpha_holder, spec.gamma).ok();
            norms.push(NormRecord {
                t,
                l2: w.l2,
                linf: w.linf,
                h_gamma0: w.h_gamma0,
                h_0gamma: w.h_0gamma,
                pseudo_energy: pseudo_energy_norm(sol, t, u, spec.gamma)?,
                zeta2_abs: sol.state(t)?.zeta2.abs(),
                main_term: split.map_or(f64::NAN, |s| s.main_term),
                remainder_bound: split.map_or(f64::NAN, |s| s.remainder_bound),
            });
            times.push(t);
            v_hat.push(profile(sol, t, u)?);
        }
        let mut series = Self { times, v_hat, accumulated_phase: Vec::new(), w_hat: Vec::new(), norms };
        series.accumulate_phase(sol, nonlinearity)?;
        Ok(series)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Trapezoid quadrature of `ν|ζ₂(τ)|^{−nρ_L/2}|v̂(τ,ξ)|^{ρ_L}` over the
    /// sampled times; sets `ŵ = e^{i·phase}v̂`.
    pub fn accumulate_phase(&mut self, sol: &ClassicalSolution, spec: &NonlinearitySpec) -> Result<()> {
        if self.times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter("profile times must be strictly increasing".into()));
        }
        self.accumulated_phase.clear();
        self.w_hat.clear();
        let Some(first) = self.v_hat.first() else {
            return Ok(());
        };
        let n = first.grid().dim() as f64;
        let density = |k: usize| -> Result<Vec<f64>> {
            let z2 = sol.state(self.times[k])?.zeta2.abs();
            let c = spec.nu * z2.powf(-n * spec.rho_l / 2.0);
            Ok(self.v_hat[k].samples().iter().map(|z| c * z.norm().powf(spec.rho_l)).collect())
        };
        let mut phase = vec![0.0; first.samples().len()];
        let mut prev = if spec.nu == 0.0 { vec![0.0; first.samples().len()] } else { density(0)? };
        self.accumulated_phase.push(phase.clone());
        for k in 1..self.times.len() {
            let cur = if spec.nu == 0.0 { vec![0.0; first.samples().len()] } else { density(k)? };
            let h = self.times[k] - self.times[k - 1];
            for ((p, a), b) in phase.iter_mut().zip(&prev).zip(&cur) {
                *p += h * (a + b) / 2.0;
            }
            self.accumulated_phase.push(phase.clone());
            prev = cur;
        }
        for (v, ph) in self.v_hat.iter().zip(&self.accumulated_phase) {
            let mut w = v.clone();
            for (z, p) in w.samples_mut().iter_mut().zip(ph) {
                if *p != 0.0 {
                    *z *= Complex64::from_polar(1.0, *p);
                }
            }
            self.w_hat.push(w);
        }
        Ok(())
    }

    /// `ŵ` at the last time, the finite-time representative of the limit profile.
    pub fn limit_profile(&self) -> Option<&WaveField> {
        self.w_hat.last()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    L2,
    Linf,
}

impl NormKind {
    pub fn of(&self, field: &WaveField) -> f64 {
        match self {
            NormKind::L2 => field.l2_norm(),
            NormKind::Linf => field.linf_norm(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            NormKind::L2 => "l2",
            NormKind::Linf => "linf",
        }
    }
}

/// Slope fit of `log d(t)` vs `log t`, or the converged flag when the
/// differences sit below [`CONVERGED_FLOOR`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RateFit {
    Fitted(LineFit),
    Converged,
}

impl RateFit {
    pub fn slope(&self) -> Option<f64> {
        match self {
            RateFit::Fitted(f) => Some(f.slope),
            RateFit::Converged => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauchyRates {
    pub norm: NormKind,
    pub reference_time: f64,
    /// Per series time: `‖ŵ(t) − ŵ(t_last)‖`.
    pub corrected: Vec<f64>,
    /// Per series time: `‖v̂(t) − v̂(t_last)‖`.
    pub uncorrected: Vec<f64>,
    /// Per series time: `min_φ ‖ŵ(t) − e^{iφ}ŵ(t_last)‖`.
    pub corrected_aligned: Vec<f64>,
    pub corrected_fit: RateFit,
    pub uncorrected_fit: RateFit,
}

fn difference(a: &WaveField, b: &WaveField, kind: NormKind) -> Result<f64> {
    Ok(kind.of(&a.sub(b)?))
}

fn aligned_difference(a: &WaveField, b: &WaveField, kind: NormKind) -> Result<f64> {
    let ip = b.inner(a)?;
    let rotated = if ip.norm() > 0.0 { b.scaled(ip / ip.norm()) } else { b.clone() };
    difference(a, &rotated, kind)
}

fn rate_fit(times: &[f64], d: &[f64], window: (f64, f64)) -> Result<RateFit> {
    let picked: Vec<(f64, f64)> = times
        .iter()
        .zip(d)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1)
        .map(|(t, v)| (*t, *v))
        .collect();
    if picked.len() < 4 {
        return Err(Error::Fit(format!("only {} samples in the window [{}, {}]", picked.len(), window.0, window.1)));
    }
    let usable: Vec<(f64, f64)> = picked.iter().copied().filter(|(_, v)| *v >= CONVERGED_FLOOR).collect();
    if usable.len() < 4 {
        if usable.is_empty() {
            return Ok(RateFit::Converged);
        }
        return Err(Error::Fit(format!("only {} samples above the converged floor", usable.len())));
    }
    let x: Vec<f64> = usable.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = usable.iter().map(|p| p.1.ln()).collect();
    Ok(RateFit::Fitted(fit_line(&x, &y)?))
}

/// Differences against the last sample and their log-log slopes on `window`.
pub fn cauchy_rates(series: &ProfileSeries, kind: NormKind, window: (f64, f64)) -> Result<CauchyRates> {
    if series.len() < 4 || series.w_hat.len() != series.len() {
        return Err(Error::Fit(format!("need at least 4 accumulated samples, got {}", series.w_hat.len())));
    }
    let last = series.len() - 1;
    let mut corrected = Vec::with_capacity(series.len());
    let mut uncorrected = Vec::with_capacity(series.len());
    let mut corrected_aligned = Vec::with_capacity(series.len());
    for k in 0..series.len() {
        corrected.push(difference(&series.w_hat[k], &series.w_hat[last], kind)?);
        uncorrected.push(difference(&series.v_hat[k], &series.v_hat[last], kind)?);
        corrected_aligned.push(aligned_difference(&series.w_hat[k], &series.w_hat[last], kind)?);
    }
    // The reference sample itself is excluded from the fit.
    let times = &series.times[..last];
    Ok(CauchyRates {
        norm: kind,
        reference_time: series.times[last],
        corrected_fit: rate_fit(times, &corrected[..last], window)?,
        uncorrected_fit: rate_fit(times, &uncorrected[..last], window)?,
        corrected,
        uncorrected,
        corrected_aligned,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Slope of `log‖u‖_∞` against `log(1+|ζ₂|)`.
    pub vs_zeta2: LineFit,
    /// Slope of `log‖u‖_∞` against `log t`.
    pub vs_t: LineFit,
}

/// Decay exponents from `(t, |ζ₂(t)|, ‖u(t)‖_∞)` samples inside `window`.
pub fn decay_fit_samples(samples: &[(f64, f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    let picked: Vec<&(f64, f64, f64)> =
        samples.iter().filter(|s| s.0 >= window.0 && s.0 <= window.1 && s.0 > 0.0).collect();
    if picked.len() < 4 {
        return Err(Error::Fit(format!("degenerate decay window: {} samples", picked.len())));
    }
    let y: Vec<f64> = picked.iter().map(|s| s.2.ln()).collect();
    let xz: Vec<f64> = picked.iter().map(|s| (1.0 + s.1).ln()).collect();
    let xt: Vec<f64> = picked.iter().map(|s| s.0.ln()).collect();
    Ok(DecayFit { vs_zeta2: fit_line(&xz, &y)?, vs_t: fit_line(&xt, &y)? })
}

pub fn decay_fit(series: &ProfileSeries, window: (f64, f64)) -> Result<DecayFit> {
    let samples: Vec<(f64, f64, f64)> = series.norms.iter().map(|r| (r.t, r.zeta2_abs, r.linf)).collect();
    decay_fit_samples(&samples, window)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitCheck {
    /// `|ζ₂|^{−n/2}‖F U₀(0,t)u‖_∞`.
    pub main_term: f64,
    /// `|ζ₂|^{−n/2}|ζ₁/ζ₂|^α‖U₀(0,t)u‖_{0,γ}`.
    pub remainder_bound: f64,
    pub actual_linf: f64,
}

pub fn linfty_split_check(
    sol: &ClassicalSolution,
    t: f64,
    field: &WaveField,
    alpha_holder: f64,
    gamma: f64,
) -> Result<SplitCheck> {
    let c = factor_coefficients(sol, t, DEFAULT_EXCLUSION_BAND)?;
    if c.mdfm.is_none() {
        return Err(Error::FactorizationUndefined {
            kind: "mdfm",
            t,
            reason: "a coefficient of the splitting vanishes".into(),
        });
    }
    let s = c.state;
    let n = field.grid().dim() as f64;
    let v = pullback(sol, t, field)?;
    let amp = s.zeta2.abs().powf(-n / 2.0);
    Ok(SplitCheck {
        main_term: amp * fourier(&v).linf_norm(),
        remainder_bound: amp * (s.zeta1 / s.zeta2).abs().powf(alpha_holder) * weighted(&v, gamma).l2_norm(),
        actual_linf: field.linf_norm(),
    })
}
