//! Split-step integration of the nonlinear equation and a Duhamel/Picard
//! cross-check at small times.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::classical::ClassicalSolution;
use crate::compare::canonicalize;
use crate::error::{Error, Result};
use crate::fft::{centered_dft_in_place, fourier, inverse_fourier};
use crate::field::{Representation, WaveField};
use crate::propagator::{propagate, pullback, reference_chirp, FactorizationKind, DEFAULT_GUARD};
use crate::sigma::SigmaModel;

/// `ν|u|^{ρ_L} + μ|u|^{ρ_S}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlinearitySpec {
    pub nu: f64,
    pub mu: f64,
    pub rho_l: f64,
    pub rho_s: f64,
}

impl NonlinearitySpec {
    pub fn linear() -> Self {
        Self { nu: 0.0, mu: 0.0, rho_l: 2.0, rho_s: 3.0 }
    }

    pub fn new(nu: f64, mu: f64, rho_l: f64, rho_s: f64) -> Result<Self> {
        let s = Self { nu, mu, rho_l, rho_s };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho_l > 0.0 && self.rho_s > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "exponents must be positive, got rho_L={} rho_S={}",
                self.rho_l, self.rho_s
            )));
        }
        if !(self.nu.is_finite() && self.mu.is_finite()) {
            return Err(Error::InvalidParameter("couplings must be finite".into()));
        }
        Ok(())
    }

    pub fn is_linear(&self) -> bool {
        self.nu == 0.0 && self.mu == 0.0
    }

    /// Scalar potential `ν a^{ρ_L} + μ a^{ρ_S}` for amplitude `a = |u|`.
    pub fn potential(&self, amplitude: f64) -> f64 {
        self.potential_sq(amplitude * amplitude)
    }

    /// [`Self::potential`] from `a² = |u|²`, avoiding `powf` for the common
    /// integer exponents.
    pub fn potential_sq(&self, a2: f64) -> f64 {
        let mut v = 0.0;
        if self.nu != 0.0 {
            v += self.nu * abs_pow(a2, self.rho_l);
        }
        if self.mu != 0.0 {
            v += self.mu * abs_pow(a2, self.rho_s);
        }
        v
    }

    /// `G(u) = (ν|u|^{ρ_L} + μ|u|^{ρ_S})u`, pointwise on any layout.
    pub fn apply(&self, field: &WaveField) -> WaveField {
        field.map(|z| z * self.potential_sq(z.norm_sqr()))
    }
}

/// `a^ρ` given `a²`.
fn abs_pow(a2: f64, rho: f64) -> f64 {
    if rho == 2.0 {
        a2
    } else if rho == 4.0 {
        a2 * a2
    } else if rho == 3.0 {
        a2 * a2.sqrt()
    } else if rho == 1.0 {
        a2.sqrt()
    } else {
        a2.powf(rho / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionConfig {
    pub model: SigmaModel,
    pub nonlinearity: NonlinearitySpec,
    /// Position layout, unit scale.
    pub initial: WaveField,
    pub t_end: f64,
    pub dt: f64,
    /// Sorted snapshot times inside `[0, t_end]`.
    pub times: Vec<f64>,
    pub r0: f64,
    pub guard: f64,
}

impl EvolutionConfig {
    pub fn new(model: SigmaModel, nonlinearity: NonlinearitySpec, initial: WaveField, t_end: f64, dt: f64) -> Self {
        Self {
            model,
            nonlinearity,
            initial,
            t_end,
            dt,
            times: vec![t_end],
            r0: 1.0,
            guard: DEFAULT_GUARD,
        }
    }

    pub fn with_times(mut self, times: Vec<f64>) -> Self {
        self.times = times;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.nonlinearity.validate()?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidParameter(format!("t_end must be nonnegative, got {}", self.t_end)));
        }
        if !(self.r0 >= 0.0) {
            return Err(Error::InvalidParameter(format!("r0 must be nonnegative, got {}", self.r0)));
        }
        if self.times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter("diagnostic times must be strictly increasing".into()));
        }
        if let (Some(&lo), Some(&hi)) = (self.times.first(), self.times.last()) {
            if lo < 0.0 || hi > self.t_end {
                return Err(Error::InvalidParameter(format!(
                    "diagnostic times must lie in [0, {}], got [{lo}, {hi}]",
                    self.t_end
                )));
            }
        }
        if self.initial.representation() != Representation::Position || self.initial.scale() != 1.0 {
            return Err(Error::InvalidParameter("initial field must be on the unit position layout".into()));
        }
        self.model.check_window(0.0, self.t_end)
    }
}

/// Exact flow of the pointwise part over `dt`: `u ← e^{−i dt (σ|x|²/2 + F(|u|))}u`.
pub fn nonlinear_phase_step(field: &WaveField, spec: &NonlinearitySpec, sigma_mid: f64, dt: f64) -> WaveField {
    let r2 = field.radius_squared();
    let mut out = field.clone();
    for (z, r) in out.samples_mut().iter_mut().zip(r2) {
        let v = sigma_mid * r / 2.0 + spec.potential_sq(z.norm_sqr());
        if v != 0.0 {
            *z *= Complex64::from_polar(1.0, -dt * v);
        }
    }
    out
}

/// `e^{−iτ|p|²/2}` with the spectral and spatial guards applied.
fn kinetic(field: &WaveField, tau: f64, guard: f64) -> Result<WaveField> {
    let spec = fourier(field);
    let edge = spec.edge_fraction();
    if edge > guard {
        return Err(Error::Aliasing { stage: "kinetic (spectrum)", fraction: edge });
    }
    let out = inverse_fourier(&spec.chirp(-tau / 2.0));
    let edge = out.edge_fraction();
    if edge > guard {
        return Err(Error::Aliasing { stage: "kinetic (window)", fraction: edge });
    }
    Ok(out)
}

/// One Strang step from `t` to `t + dt`: half kinetic, pointwise phase at the
/// midpoint, half kinetic.
pub fn strang_step(
    field: &WaveField,
    model: &SigmaModel,
    spec: &NonlinearitySpec,
    t: f64,
    dt: f64,
    guard: f64,
) -> Result<WaveField> {
    let half = kinetic(field, dt / 2.0, guard)?;
    let sigma = model.evaluate(t + dt / 2.0)?;
    let kicked = nonlinear_phase_step(&half, spec, sigma, dt);
    kinetic(&kicked, dt / 2.0, guard)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub field: WaveField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub t: f64,
    pub error: Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub steps: usize,
    /// `max |‖u(t)‖₂/‖u₀‖₂ − 1|` over snapshots.
    pub mass_drift: f64,
    /// Set when the run stopped early; snapshots up to the failure are kept.
    pub failure: Option<Failure>,
}

impl Trajectory {
    pub fn completed(&self) -> bool {
        self.failure.is_none()
    }

    pub fn at(&self, t: f64) -> Option<&WaveField> {
        self.snapshots.iter().find(|s| s.t == t).map(|s| &s.field)
    }

    pub fn last(&self) -> Option<&Snapshot> {
        self.snapshots.last()
    }
}

/// Integrates from 0 to `t_end`. Each interval between consecutive stop
/// points (snapshot times and `t_end`) is split into `⌈Δ/dt⌉` equal steps, so
/// halving `dt` halves every step. Adjacent half kinetic steps are merged.
pub fn evolve(config: &EvolutionConfig) -> Result<Trajectory> {
    config.validate()?;
    let mut stops: Vec<f64> = config.times.clone();
    if stops.last() != Some(&config.t_end) {
        stops.push(config.t_end);
    }
    let wanted = |t: f64| config.times.contains(&t);
    let mass0 = config.initial.l2_norm();
    let drift = |f: &WaveField| if mass0 == 0.0 { f.l2_norm() } else { (f.l2_norm() / mass0 - 1.0).abs() };

    let mut traj = Trajectory { snapshots: Vec::new(), steps: 0, mass_drift: 0.0, failure: None };
    let mut u = config.initial.clone();
    let mut stepper = Stepper::new(&u, config.guard);
    let mut t = 0.0;
    let spec = &config.nonlinearity;
    for &stop in &stops {
        if stop > t {
            let m = ((stop - t) / config.dt).ceil().max(1.0) as usize;
            let h = (stop - t) / m as f64;
            match advance(&u, &config.model, spec, t, h, m, &mut stepper) {
                Ok(v) => u = v,
                Err((k, error)) => {
                    traj.failure = Some(Failure { t: t + k as f64 * h, error });
                    traj.steps += k;
                    return Ok(traj);
                }
            }
            traj.steps += m;
            t = stop;
        }
        if wanted(stop) {
            traj.mass_drift = traj.mass_drift.max(drift(&u));
            traj.snapshots.push(Snapshot { t: stop, field: u.clone() });
        }
    }
    Ok(traj)
}

/// Preallocated split-step kernel for one grid: squared frequencies and
/// positions of the unit layout, and the outer-band mask of the guards.
struct Stepper {
    n: usize,
    dim: usize,
    xi2: Vec<f64>,
    x2: Vec<f64>,
    edge: Vec<usize>,
    guard: f64,
    /// `(τ, e^{−iτ|ξ|²/2}/N^dim)` for the most recent τ values.
    phases: Vec<(f64, Vec<Complex64>)>,
}

impl Stepper {
    fn new(field: &WaveField, guard: f64) -> Self {
        let grid = *field.grid();
        let (n, dim) = (grid.points(), grid.dim());
        let x2 = field.radius_squared();
        let xi2 = fourier(field).radius_squared();
        let cut = (0.45 * n as f64).ceil() as i64;
        let edge = (0..grid.len())
            .filter(|&idx| {
                let ij = grid.unflatten(idx);
                (0..dim).any(|a| (ij[a] as i64 - (n / 2) as i64).abs() >= cut)
            })
            .collect();
        Self { n, dim, xi2, x2, edge, guard, phases: Vec::new() }
    }

    fn edge_fraction(&self, data: &[Complex64]) -> f64 {
        let total: f64 = data.iter().map(|z| z.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        self.edge.iter().map(|&i| data[i].norm_sqr()).sum::<f64>() / total
    }

    fn phase(&mut self, tau: f64) -> usize {
        if let Some(k) = self.phases.iter().position(|(t, _)| *t == tau) {
            return k;
        }
        // 1/N^dim is a power of two, so the scaling is exact.
        let norm = 1.0 / (self.n as f64).powi(self.dim as i32);
        let table = self.xi2.iter().map(|r| Complex64::from_polar(norm, -tau * r / 2.0)).collect();
        if self.phases.len() >= 4 {
            self.phases.remove(0);
        }
        self.phases.push((tau, table));
        self.phases.len() - 1
    }

    fn kinetic(&mut self, data: &mut [Complex64], tau: f64) -> Result<()> {
        centered_dft_in_place(data, self.n, self.dim, false);
        let edge = self.edge_fraction(data);
        if edge > self.guard {
            return Err(Error::Aliasing { stage: "kinetic (spectrum)", fraction: edge });
        }
        let k = self.phase(tau);
        for (z, p) in data.iter_mut().zip(&self.phases[k].1) {
            *z *= p;
        }
        centered_dft_in_place(data, self.n, self.dim, true);
        let edge = self.edge_fraction(data);
        if edge > self.guard {
            return Err(Error::Aliasing { stage: "kinetic (window)", fraction: edge });
        }
        Ok(())
    }

    fn kick(&self, data: &mut [Complex64], spec: &NonlinearitySpec, sigma: f64, dt: f64) {
        for (z, r) in data.iter_mut().zip(&self.x2) {
            let v = sigma * r / 2.0 + spec.potential_sq(z.norm_sqr());
            if v != 0.0 {
                *z *= Complex64::from_polar(1.0, -dt * v);
            }
        }
    }
}

/// `m` Strang steps of size `h` with merged kinetic half-steps. On failure
/// returns the index of the failing step.
fn advance(
    u0: &WaveField,
    model: &SigmaModel,
    spec: &NonlinearitySpec,
    t0: f64,
    h: f64,
    m: usize,
    stepper: &mut Stepper,
) -> std::result::Result<WaveField, (usize, Error)> {
    let mut data = u0.samples().to_vec();
    stepper.kinetic(&mut data, h / 2.0).map_err(|e| (0, e))?;
    for k in 0..m {
        let tm = t0 + (k as f64 + 0.5) * h;
        let sigma = model.evaluate(tm).map_err(|e| (k, e))?;
        stepper.kick(&mut data, spec, sigma, h);
        let tau = if k + 1 == m { h / 2.0 } else { h };
        stepper.kinetic(&mut data, tau).map_err(|e| (k, e))?;
    }
    Ok(WaveField::new(*u0.grid(), data, u0.representation(), u0.scale()).expect("layout of the input"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardReport {
    /// `sup_j ‖u_{k+1}(s_j) − u_k(s_j)‖₂` for `k = 0, 1, …`.
    pub residuals: Vec<f64>,
    pub mesh: Vec<f64>,
    /// Fixed-point iterate at the final mesh time, unit position layout.
    pub fixed_point: WaveField,
}

impl PicardReport {
    pub fn ratios(&self) -> Vec<f64> {
        self.residuals.windows(2).map(|w| w[1] / w[0]).collect()
    }
}

/// Picard iteration of `u = U₀(t,0)u₀ − i∫₀ᵗ U₀(t,s)G(u(s))ds` on a uniform
/// mesh of `nodes` points over `[0, t_final]`, carried out on the pulled-back
/// profile `v(s) = U₀(0,s)u(s)` with cumulative trapezoid quadrature.
///
/// Iterates are stored as the Duhamel increment `D = v − u₀`, so that the
/// residual is computed from increments alone and keeps relative precision
/// well below the size of `u₀`.
pub fn picard_verify(
    sol: &ClassicalSolution,
    config: &EvolutionConfig,
    t_final: f64,
    iterations: usize,
    nodes: usize,
) -> Result<PicardReport> {
    config.validate()?;
    if nodes < 2 || !(t_final > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "picard mesh needs ≥ 2 nodes and T > 0, got {nodes} nodes and T = {t_final}"
        )));
    }
    let u0 = &config.initial;
    let spec = &config.nonlinearity;
    let mesh: Vec<f64> = (0..nodes).map(|j| t_final * j as f64 / (nodes - 1) as f64).collect();
    let h = t_final / (nodes - 1) as f64;
    let zero = WaveField::zeros(*u0.grid());

    let mut incr: Vec<WaveField> = vec![zero.clone(); nodes];
    let mut residuals = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        // Integrand U₀(0,s)G(U₀(s,0)v(s)) at each node.
        let mut integrand = Vec::with_capacity(nodes);
        for (j, &s) in mesh.iter().enumerate() {
            let v = add(u0, &incr[j]);
            let u = propagate(sol, s, &v, FactorizationKind::Auto)?;
            let g = pullback(sol, s, &spec.apply(&u))?;
            integrand.push(unit_layout(&g)?);
        }
        let mut next = Vec::with_capacity(nodes);
        let mut acc = zero.clone();
        next.push(zero.clone());
        for j in 1..nodes {
            // acc += −i h/2 (f_{j−1} + f_j)
            let c = Complex64::new(0.0, -h / 2.0);
            for ((a, p), q) in acc
                .samples_mut()
                .iter_mut()
                .zip(integrand[j - 1].samples())
                .zip(integrand[j].samples())
            {
                *a += c * (p + q);
            }
            next.push(acc.clone());
        }
        let mut r = 0.0f64;
        for (a, b) in next.iter().zip(&incr) {
            r = r.max(a.distance(b)?);
        }
        residuals.push(r);
        incr = next;
        if r == 0.0 {
            break;
        }
    }
    let v_end = add(u0, &incr[nodes - 1]);
    let u_end = propagate(sol, t_final, &v_end, FactorizationKind::Auto)?;
    let fixed_point = canonicalize(&u_end, reference_chirp(sol, t_final)?)?;
    Ok(PicardReport { residuals, mesh, fixed_point })
}

fn add(a: &WaveField, b: &WaveField) -> WaveField {
    let mut out = a.clone();
    for (x, y) in out.samples_mut().iter_mut().zip(b.samples()) {
        *x += y;
    }
    out
}

/// Pulled-back fields normally return on the unit layout; anything else is
/// resampled there.
fn unit_layout(field: &WaveField) -> Result<WaveField> {
    canonicalize(field, 0.0)
}
