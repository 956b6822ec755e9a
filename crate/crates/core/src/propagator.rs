//! The linear propagator `U₀(t,0)` of `i∂ₜu = (−Δ/2 + σ(t)|x|²/2)u` as
//! chains of elementary factors, plus two independent oracles.
//!
//! Factor chains are listed in application order (rightmost operator first).
//! Every factor has a closed-form inverse, so pullbacks invert chains
//! factor by factor.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::classical::{in_band, ClassicalSolution, DEFAULT_EXCLUSION_BAND};
use crate::error::{Error, Result};
use crate::fft::{fourier, fourier_multiplier, free_flow, inverse_fourier};
use crate::field::{Grid, WaveField};
use crate::sigma::SigmaModel;

/// Default refusal threshold of the aliasing guard (fraction of `‖·‖²`).
pub const DEFAULT_GUARD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FactorizationKind {
    Korotyaev,
    QuadraticPhase,
    Mdfm,
    Mdmdfm,
    Auto,
}

impl FactorizationKind {
    pub const EXPLICIT: [FactorizationKind; 4] = [
        FactorizationKind::Mdfm,
        FactorizationKind::QuadraticPhase,
        FactorizationKind::Korotyaev,
        FactorizationKind::Mdmdfm,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FactorizationKind::Korotyaev => "korotyaev",
            FactorizationKind::QuadraticPhase => "quadratic-phase",
            FactorizationKind::Mdfm => "mdfm",
            FactorizationKind::Mdmdfm => "mdmdfm",
            FactorizationKind::Auto => "auto",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "korotyaev" => Ok(FactorizationKind::Korotyaev),
            "quadratic-phase" | "qp" => Ok(FactorizationKind::QuadraticPhase),
            "mdfm" => Ok(FactorizationKind::Mdfm),
            "mdmdfm" => Ok(FactorizationKind::Mdmdfm),
            "auto" => Ok(FactorizationKind::Auto),
            other => Err(Error::Parse(format!("unknown factorization '{other}'"))),
        }
    }
}

/// Elementary unitary factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Factor {
    /// `e^{iβ|x|²}`
    Chirp(f64),
    /// `e^{−ib|p|²}`
    FreeFlow(f64),
    Fourier,
    InverseFourier,
    /// `scale ← scale·τ`, samples multiplied by `prefactor`.
    Dilate { tau: f64, prefactor: Complex64 },
    /// `S^k` with `(Sf)(x) = e^{−inπ/2} f(−x)`; `k` may be negative.
    Parity(i64),
    /// Global phase `e^{iφ}`.
    Phase(f64),
}

impl Factor {
    pub fn inverse(&self) -> Factor {
        match *self {
            Factor::Chirp(b) => Factor::Chirp(-b),
            Factor::FreeFlow(b) => Factor::FreeFlow(-b),
            Factor::Fourier => Factor::InverseFourier,
            Factor::InverseFourier => Factor::Fourier,
            Factor::Dilate { tau, prefactor } => Factor::Dilate {
                tau: 1.0 / tau,
                prefactor: 1.0 / prefactor,
            },
            Factor::Parity(k) => Factor::Parity(-k),
            Factor::Phase(p) => Factor::Phase(-p),
        }
    }

    /// Applies the factor, refusing if more than `guard` of the mass sits in
    /// the outer band after a Fourier-type step.
    pub fn apply(&self, field: &WaveField, guard: f64) -> Result<WaveField> {
        let check = |stage: &'static str, fraction: f64| {
            if fraction > guard {
                Err(Error::Aliasing { stage, fraction })
            } else {
                Ok(())
            }
        };
        match *self {
            Factor::Chirp(b) => Ok(field.chirp(b)),
            Factor::FreeFlow(b) => {
                if b == 0.0 {
                    return Ok(field.clone());
                }
                let (out, spectral) = free_flow(field, b);
                check("free flow (spectrum)", spectral)?;
                check("free flow (window)", out.edge_fraction())?;
                Ok(out)
            }
            Factor::Fourier => {
                let out = fourier(field);
                check("fourier", out.edge_fraction())?;
                Ok(out)
            }
            Factor::InverseFourier => {
                let out = inverse_fourier(field);
                check("inverse fourier", out.edge_fraction())?;
                Ok(out)
            }
            Factor::Dilate { tau, prefactor } => {
                let mut out = field.scaled(prefactor);
                let rep = out.representation();
                out.set_layout(rep, snap_unit(field.scale() * tau));
                Ok(out)
            }
            Factor::Parity(k) => Ok(parity_shift(field, k)),
            Factor::Phase(p) => Ok(if p == 0.0 {
                field.clone()
            } else {
                field.scaled(Complex64::from_polar(1.0, p))
            }),
        }
    }
}

/// Rounds a scale that is within a few ulps of `±1` to exactly `±1`, so that
/// a dilation followed by its inverse restores the unit layout.
fn snap_unit(scale: f64) -> f64 {
    if (scale.abs() - 1.0).abs() <= 8.0 * f64::EPSILON {
        scale.signum()
    } else {
        scale
    }
}

pub fn apply_chain(field: &WaveField, chain: &[Factor], guard: f64) -> Result<WaveField> {
    let mut cur = field.clone();
    for f in chain {
        cur = f.apply(&cur, guard)?;
    }
    Ok(cur)
}

pub fn invert_chain(chain: &[Factor]) -> Vec<Factor> {
    chain.iter().rev().map(Factor::inverse).collect()
}

/// `M(τ)`: multiplication by `e^{i|x|²/(2τ)}` in physical coordinates.
pub fn modulation(field: &WaveField, tau: f64) -> Result<WaveField> {
    if tau == 0.0 || !tau.is_finite() {
        return Err(Error::InvalidParameter(format!("modulation parameter must be finite and nonzero, got {tau}")));
    }
    Ok(field.chirp(1.0 / (2.0 * tau)))
}

/// `arg(iτ)` with `arg i = π/2` and `arg τ ∈ {0, π}`.
fn dilation_arg(tau: f64) -> f64 {
    PI / 2.0 + if tau < 0.0 { PI } else { 0.0 }
}

/// `(iτ)^{−n/2}` on the branch of [`dilation_arg`].
pub fn dilation_prefactor(tau: f64, dim: usize) -> Complex64 {
    let n = dim as f64;
    Complex64::from_polar(tau.abs().powf(-n / 2.0), -n / 2.0 * dilation_arg(tau))
}

/// `D(τ)`: `(iτ)^{−n/2} φ(x/τ)` realized as a change of `scale`.
pub fn dilation(field: &WaveField, tau: f64) -> Result<WaveField> {
    if tau == 0.0 || !tau.is_finite() {
        return Err(Error::InvalidParameter(format!("dilation parameter must be finite and nonzero, got {tau}")));
    }
    let prefactor = dilation_prefactor(tau, field.grid().dim());
    Factor::Dilate { tau, prefactor }.apply(field, f64::INFINITY)
}

/// `S^count`: reflection `x → −x` with phase `e^{−inπ/2}` per application.
pub fn parity_shift(field: &WaveField, count: i64) -> WaveField {
    let grid = *field.grid();
    let n = grid.dim() as f64;
    let phase = Complex64::from_polar(1.0, -n * PI / 2.0 * count as f64);
    let mut out = field.scaled(phase);
    if count.rem_euclid(2) == 1 {
        let src = out.samples().to_vec();
        let pts = grid.points();
        let dim = grid.dim();
        for (idx, z) in out.samples_mut().iter_mut().enumerate() {
            let ij = grid.unflatten(idx);
            let mut flat = 0;
            for a in 0..dim {
                flat = flat * pts + (pts - ij[a]) % pts;
            }
            *z = src[flat];
        }
    }
    out
}

/// Settings shared by all factorizations.
#[derive(Debug, Clone, Copy)]
pub struct PropagatorOptions {
    pub band: f64,
    pub guard: f64,
}

impl Default for PropagatorOptions {
    fn default() -> Self {
        Self {
            band: DEFAULT_EXCLUSION_BAND,
            guard: DEFAULT_GUARD,
        }
    }
}

fn undefined(kind: FactorizationKind, t: f64, reason: &str) -> Error {
    Error::FactorizationUndefined {
        kind: kind.name(),
        t,
        reason: reason.to_string(),
    }
}

/// Phase of the Mehler kernel's normalization including the Maslov jumps
/// at zeros of `ζ₂`.
fn mehler_phase(sol: &ClassicalSolution, t: f64, dim: usize) -> f64 {
    let n = dim as f64;
    let m = sol.zeta2_zero_count_strict(t) as f64;
    let phi = PI * n / 4.0 + PI * n * m / 2.0;
    if t >= 0.0 {
        -phi
    } else {
        phi
    }
}

/// The factor chain of `kind` at time `t` (explicit kinds only).
pub fn factor_chain(
    sol: &ClassicalSolution,
    t: f64,
    kind: FactorizationKind,
    dim: usize,
    opts: &PropagatorOptions,
) -> Result<Vec<Factor>> {
    let s = sol.state(t)?;
    let n = dim as f64;
    match kind {
        FactorizationKind::Korotyaev => {
            if in_band(s.zeta1, t, opts.band) {
                return Err(undefined(kind, t, "zeta1 lies in the exclusion band"));
            }
            // Backward in time each zero contributes S⁻¹.
            let nu = sol.zeta1_zero_count(t) as i64 * if t >= 0.0 { 1 } else { -1 };
            let a = s.zeta1.abs();
            Ok(vec![
                Factor::Parity(nu),
                Factor::FreeFlow(s.zeta2 / (2.0 * s.zeta1)),
                Factor::Dilate {
                    tau: a,
                    prefactor: Complex64::new(a.powf(-n / 2.0), 0.0),
                },
                Factor::Chirp(s.zeta1p / (2.0 * s.zeta1)),
            ])
        }
        FactorizationKind::QuadraticPhase => {
            if in_band(s.zeta2, t, opts.band) {
                return Err(undefined(kind, t, "zeta2 lies in the exclusion band"));
            }
            let a = (1.0 - s.zeta2p) / (2.0 * s.zeta2);
            let b = s.zeta2 / 2.0;
            let c = (1.0 - s.zeta1) / (2.0 * s.zeta2);
            let base = -PI * n * s.zeta2.signum() / 4.0;
            Ok(vec![
                Factor::Chirp(-c),
                Factor::FreeFlow(b),
                Factor::Chirp(-a),
                Factor::Phase(mehler_phase(sol, t, dim) - base),
            ])
        }
        FactorizationKind::Mdfm => {
            if in_band(s.zeta1, t, opts.band) || in_band(s.zeta2, t, opts.band) || in_band(s.zeta2p, t, opts.band) {
                return Err(undefined(kind, t, "zeta1, zeta2 or zeta2' lies in the exclusion band"));
            }
            let prefactor = dilation_prefactor(s.zeta2, dim);
            let base = -n / 2.0 * dilation_arg(s.zeta2);
            Ok(vec![
                Factor::Chirp(s.zeta1 / (2.0 * s.zeta2)),
                Factor::Fourier,
                Factor::Dilate {
                    tau: s.zeta2,
                    prefactor,
                },
                Factor::Chirp(s.zeta2p / (2.0 * s.zeta2)),
                Factor::Phase(mehler_phase(sol, t, dim) - base),
            ])
        }
        FactorizationKind::Mdmdfm => {
            let (a1, a2) = (s.a1(), s.a2());
            let radius = 1.0 / a1.sqrt();
            let mut chain = harmonic_flow_chain(s.theta);
            chain.push(Factor::Dilate {
                tau: radius,
                prefactor: Complex64::new(radius.powf(-n / 2.0), 0.0),
            });
            // M(−1/a₂) = e^{−ia₂|x|²/2}; tends to the identity as a₂ → 0.
            chain.push(Factor::Chirp(-a2 / 2.0));
            Ok(chain)
        }
        FactorizationKind::Auto => Err(Error::InvalidParameter("Auto has no single chain".into())),
    }
}

/// `e^{−iθ(|p|²+|x|²)/2}` without singular coefficients: `θ = kπ + r` with
/// `|r| ≤ π/2`, `e^{−iπH} = S`, and the rotation by `r` split as
/// chirp ∘ free flow ∘ chirp.
pub fn harmonic_flow_chain(theta: f64) -> Vec<Factor> {
    let k = (theta / PI).round();
    let r = theta - k * PI;
    let mut chain = Vec::with_capacity(4);
    if k != 0.0 {
        chain.push(Factor::Parity(k as i64));
    }
    if r != 0.0 {
        let beta = -(r / 2.0).tan() / 2.0;
        chain.push(Factor::Chirp(beta));
        chain.push(Factor::FreeFlow(r.sin() / 2.0));
        chain.push(Factor::Chirp(beta));
    }
    chain
}

/// Resolves a kind to the order of chains to try.
fn candidates(sol: &ClassicalSolution, t: f64, kind: FactorizationKind, opts: &PropagatorOptions) -> Result<Vec<FactorizationKind>> {
    if kind != FactorizationKind::Auto {
        return Ok(vec![kind]);
    }
    let s = sol.state(t)?;
    let z1 = !in_band(s.zeta1, t, opts.band);
    let z2 = !in_band(s.zeta2, t, opts.band);
    let z2p = !in_band(s.zeta2p, t, opts.band);
    let mut out = Vec::new();
    if z1 && z2 && z2p {
        out.push(FactorizationKind::Mdfm);
    }
    if z2 {
        out.push(FactorizationKind::QuadraticPhase);
    }
    if z1 {
        out.push(FactorizationKind::Korotyaev);
    }
    out.push(FactorizationKind::Mdmdfm);
    Ok(out)
}

/// Outcome of a propagation: the field and the chain that produced it.
#[derive(Debug, Clone)]
pub struct Propagated {
    pub field: WaveField,
    pub kind: FactorizationKind,
}

fn run(
    sol: &ClassicalSolution,
    t: f64,
    field: &WaveField,
    kind: FactorizationKind,
    opts: &PropagatorOptions,
    inverse: bool,
) -> Result<Propagated> {
    let trivially_defined = matches!(
        kind,
        FactorizationKind::Auto | FactorizationKind::Korotyaev | FactorizationKind::Mdmdfm
    );
    if t == 0.0 && trivially_defined {
        sol.state(t)?;
        return Ok(Propagated {
            field: field.clone(),
            kind: if kind == FactorizationKind::Auto {
                FactorizationKind::Korotyaev
            } else {
                kind
            },
        });
    }
    let dim = field.grid().dim();
    let mut last_err = None;
    for k in candidates(sol, t, kind, opts)? {
        let chain = factor_chain(sol, t, k, dim, opts)?;
        let chain = if inverse { invert_chain(&chain) } else { chain };
        match apply_chain(field, &chain, opts.guard) {
            Ok(f) => return Ok(Propagated { field: f, kind: k }),
            Err(e @ Error::Aliasing { .. }) if kind == FactorizationKind::Auto => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.expect("at least one candidate"))
}

/// `U₀(t,0)·field`, reporting which factorization was used.
pub fn propagate_with(
    sol: &ClassicalSolution,
    t: f64,
    field: &WaveField,
    kind: FactorizationKind,
    opts: &PropagatorOptions,
) -> Result<Propagated> {
    run(sol, t, field, kind, opts, false)
}

/// `U₀(0,t)·field`, reporting which factorization was used.
pub fn pullback_with(
    sol: &ClassicalSolution,
    t: f64,
    field: &WaveField,
    kind: FactorizationKind,
    opts: &PropagatorOptions,
) -> Result<Propagated> {
    run(sol, t, field, kind, opts, true)
}

pub fn propagate(sol: &ClassicalSolution, t: f64, field: &WaveField, kind: FactorizationKind) -> Result<WaveField> {
    propagate_with(sol, t, field, kind, &PropagatorOptions::default()).map(|p| p.field)
}

pub fn pullback(sol: &ClassicalSolution, t: f64, field: &WaveField) -> Result<WaveField> {
    pullback_with(sol, t, field, FactorizationKind::Auto, &PropagatorOptions::default()).map(|p| p.field)
}

pub fn apply_korotyaev(sol: &ClassicalSolution, t: f64, field: &WaveField) -> Result<WaveField> {
    propagate(sol, t, field, FactorizationKind::Korotyaev)
}

pub fn apply_quadratic_phase(sol: &ClassicalSolution, t: f64, field: &WaveField) -> Result<WaveField> {
    propagate(sol, t, field, FactorizationKind::QuadraticPhase)
}

pub fn apply_mdfm(sol: &ClassicalSolution, t: f64, field: &WaveField) -> Result<WaveField> {
    propagate(sol, t, field, FactorizationKind::Mdfm)
}

pub fn apply_mdmdfm(sol: &ClassicalSolution, t: f64, field: &WaveField) -> Result<WaveField> {
    propagate(sol, t, field, FactorizationKind::Mdmdfm)
}

/// Closed-form evolution of `e^{−|x|²/(2w²)}`:
/// `u = z^{−n/2} e^{iq|x|²/2}` with `q₀ = i/w²`, `z = ζ₁ + ζ₂q₀`,
/// `q = (ζ₁' + ζ₂'q₀)/z`. The branch of `z^{−n/2}` follows `arg z`
/// continuously from `z(0) = 1`, tracked through the polar angle `θ`.
pub fn gaussian_exact(sol: &ClassicalSolution, t: f64, width: f64, grid: Grid) -> Result<WaveField> {
    if !(width > 0.0) {
        return Err(Error::InvalidParameter(format!("width must be positive, got {width}")));
    }
    let s = sol.state(t)?;
    let q0 = Complex64::new(0.0, 1.0 / (width * width));
    let z = s.zeta1 + s.zeta2 * q0;
    let q = (s.zeta1p + s.zeta2p * q0) / z;
    let wrap = |a: f64| a - 2.0 * PI * ((a + PI) / (2.0 * PI)).floor();
    let arg = s.theta + wrap(z.arg() - s.theta);
    let n = grid.dim() as f64;
    let amp = Complex64::from_polar(z.norm().powf(-n / 2.0), -n / 2.0 * arg);
    Ok(WaveField::from_fn(grid, |x| {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        amp * (Complex64::new(0.0, 0.5 * r2) * q).exp()
    }))
}

/// Crank–Nicolson stepping of `i∂ₜv = (−Δ/2 + σ(t)|x|²/2)v` with a spectral
/// Laplacian and the potential at step midpoints. Each implicit step is solved
/// by a fixed-point iteration preconditioned by the kinetic part, which
/// contracts when `dt·max|V|/2 < 1`.
pub fn crank_nicolson_linear(model: &SigmaModel, t0: f64, t1: f64, dt: f64, field: &WaveField) -> Result<WaveField> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    if t1 == t0 {
        return Ok(field.clone());
    }
    model.check_window(t0.min(t1), t0.max(t1))?;
    let steps = ((t1 - t0).abs() / dt).ceil().max(1.0) as usize;
    let h = (t1 - t0) / steps as f64;
    let delta = h / 2.0;
    let r2 = field.radius_squared();
    let mut v = field.clone();
    let mut prev: Option<WaveField> = None;
    for step in 0..steps {
        let tm = t0 + (step as f64 + 0.5) * h;
        let sig = model.evaluate(tm)?;
        let pot: Vec<f64> = r2.iter().map(|r| 0.5 * sig * r).collect();
        // rhs = (1 − iδH) v
        let mut rhs = fourier_multiplier(&v, |k2| Complex64::new(1.0, -delta * 0.5 * k2));
        for ((z, p), vv) in rhs.samples_mut().iter_mut().zip(&pot).zip(v.samples()) {
            *z -= Complex64::new(0.0, delta * p) * vv;
        }
        let mut guess = match &prev {
            Some(p) => {
                let mut g = v.clone();
                for (a, b) in g.samples_mut().iter_mut().zip(p.samples()) {
                    *a = 2.0 * *a - b;
                }
                g
            }
            None => v.clone(),
        };
        let norm = v.l2_norm().max(1e-300);
        let mut converged = false;
        let mut change = f64::INFINITY;
        for _ in 0..500 {
            let mut src = rhs.clone();
            for ((z, p), g) in src.samples_mut().iter_mut().zip(&pot).zip(guess.samples()) {
                *z -= Complex64::new(0.0, delta * p) * g;
            }
            let next = fourier_multiplier(&src, |k2| Complex64::new(1.0, delta * 0.5 * k2).inv());
            let new_change = next.distance(&guess)? / norm;
            guess = next;
            if new_change < 1e-14 {
                converged = true;
                break;
            }
            if new_change > change && new_change > 1.0 {
                break;
            }
            change = new_change;
        }
        if !converged {
            return Err(Error::InnerSolve {
                t: tm,
                residual: change,
            });
        }
        prev = Some(std::mem::replace(&mut v, guess));
    }
    Ok(v)
}

/// Chirp `β` such that `e^{−iβ|x|²}·U₀(t,0)φ` varies slowly: the final
/// MDMDFM modulation `−a₂/2`, defined for all `t`.
pub fn reference_chirp(sol: &ClassicalSolution, t: f64) -> Result<f64> {
    Ok(-sol.state(t)?.a2() / 2.0)
}
