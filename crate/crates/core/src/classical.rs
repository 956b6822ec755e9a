//! Fundamental solutions of Hill's equation `y'' + σ(t) y = 0`.
//!
//! The state integrated is `[ζ₁, ζ₁', ζ₂, ζ₂', θ]` with `θ' = 1/(ζ₁² + ζ₂²)`.
//! Since the Wronskian is one, `ζ₁ + iζ₂ = R e^{iθ}`: the angle `θ` is the
//! polar angle of the pair, which doubles as an independent zero counter.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fit::{fit_loglog, log_space, LineFit};
use crate::ode::{integrate, DenseTrajectory, Tolerances};
use crate::sigma::SigmaModel;

/// Denominators below `band·(1+|t|)` count as zero.
pub const DEFAULT_EXCLUSION_BAND: f64 = 1e-8;

/// Refinement points examined inside every accepted step when bracketing zeros.
const BRACKET_SUBDIVISIONS: usize = 4;

pub fn in_band(value: f64, t: f64, band: f64) -> bool {
    value.abs() < band * (1.0 + t.abs())
}

/// Classical data at a single time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalState {
    pub t: f64,
    pub zeta1: f64,
    pub zeta1p: f64,
    pub zeta2: f64,
    pub zeta2p: f64,
    /// `∫₀ᵗ a₁`.
    pub theta: f64,
}

impl ClassicalState {
    fn from_vec(t: f64, y: [f64; 5]) -> Self {
        Self {
            t,
            zeta1: y[0],
            zeta1p: y[1],
            zeta2: y[2],
            zeta2p: y[3],
            theta: y[4],
        }
    }

    pub fn wronskian(&self) -> f64 {
        self.zeta1 * self.zeta2p - self.zeta1p * self.zeta2
    }

    /// `|W − 1|` relative to the size of the products forming `W`.
    ///
    /// For growing solutions (e.g. `cosh`) the two products are each of size
    /// `R²` and cancel down to one, so only the relative residual is
    /// meaningful in double precision.
    pub fn wronskian_residual(&self) -> f64 {
        let scale = (self.zeta1 * self.zeta2p).abs() + (self.zeta1p * self.zeta2).abs();
        (self.wronskian() - 1.0).abs() / scale.max(1.0)
    }

    pub fn radius_sq(&self) -> f64 {
        self.zeta1 * self.zeta1 + self.zeta2 * self.zeta2
    }

    pub fn a1(&self) -> f64 {
        1.0 / self.radius_sq()
    }

    pub fn a2(&self) -> f64 {
        -(self.zeta1 * self.zeta1p + self.zeta2 * self.zeta2p) / self.radius_sq()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KorotyaevCoefficients {
    /// `ζ₁'/(2ζ₁)`
    pub chirp: f64,
    /// `log|ζ₁|`
    pub log_abs_zeta1: f64,
    /// `ζ₂/(2ζ₁)`
    pub free: f64,
    /// Number of zeros of `ζ₁` between 0 and t.
    pub nu: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticPhaseCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdfmCoefficients {
    /// `ζ₂/ζ₂'`, the outer modulation parameter.
    pub outer: f64,
    /// `ζ₂`, the dilation parameter.
    pub dilation: f64,
    /// `ζ₂/ζ₁`, the inner modulation parameter.
    pub inner: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdmdfmCoefficients {
    pub a1: f64,
    pub a2: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorCoefficients {
    pub state: ClassicalState,
    pub korotyaev: Option<KorotyaevCoefficients>,
    pub quadratic_phase: Option<QuadraticPhaseCoefficients>,
    pub mdfm: Option<MdfmCoefficients>,
    pub mdmdfm: MdmdfmCoefficients,
}

/// Dense solution of the two fundamental initial-value problems on
/// `[-t_max, t_max]`.
#[derive(Debug, Clone)]
pub struct ClassicalSolution {
    model: SigmaModel,
    t_max: f64,
    tol: f64,
    forward: DenseTrajectory<5>,
    backward: DenseTrajectory<5>,
    samples: Vec<ClassicalState>,
    zero_count: Vec<usize>,
    residuals: Vec<f64>,
    zeta1_zeros_pos: Vec<f64>,
    zeta1_zeros_neg: Vec<f64>,
    zeta2_zeros_pos: Vec<f64>,
    zeta2_zeros_neg: Vec<f64>,
    degenerate_zeros: Vec<f64>,
}

fn rhs(model: &SigmaModel) -> impl Fn(f64, &[f64; 5]) -> [f64; 5] + '_ {
    move |t, y| {
        let s = model.evaluate(t).unwrap_or(f64::NAN);
        [y[1], -s * y[0], y[3], -s * y[2], 1.0 / (y[0] * y[0] + y[2] * y[2])]
    }
}

/// Zeros of component `idx` along one trajectory, ordered by distance from 0.
/// Also returns the zeros where the derivative (component `idx+1`) is tiny.
fn bracket_zeros(traj: &DenseTrajectory<5>, idx: usize) -> (Vec<f64>, Vec<f64>) {
    let mut zeros = Vec::new();
    let mut degenerate = Vec::new();
    for step in &traj.steps {
        let mut ta = step.t0;
        let mut fa = step.start()[idx];
        for k in 1..=BRACKET_SUBDIVISIONS {
            let tb = if k == BRACKET_SUBDIVISIONS {
                step.t1()
            } else {
                step.t0 + step.h * k as f64 / BRACKET_SUBDIVISIONS as f64
            };
            let fb = if k == BRACKET_SUBDIVISIONS {
                step.end()[idx]
            } else {
                step.interpolate(tb)[idx]
            };
            if fa != 0.0 && (fb == 0.0 || fa.signum() != fb.signum()) {
                let root = if fb == 0.0 {
                    tb
                } else {
                    bisect(|t| step.interpolate(t)[idx], ta, tb, fa)
                };
                let slope = step.interpolate(root)[idx + 1];
                if slope.abs() < 1e-8 {
                    degenerate.push(root);
                }
                zeros.push(root);
            }
            ta = tb;
            fa = fb;
        }
    }
    (zeros, degenerate)
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, fa: f64) -> f64 {
    let sa = fa.signum();
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == sa {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Integrates Hill's equation for `ζ₁`, `ζ₂` on `[-t_max, t_max]`.
///
/// `tol` is used as both relative and absolute tolerance. The run fails if
/// the Wronskian residual anywhere exceeds `100·tol`.
pub fn solve_fundamental(model: &SigmaModel, t_max: f64, tol: f64) -> Result<ClassicalSolution> {
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::InvalidParameter(format!("t_max must be positive, got {t_max}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    model.check_window(-t_max, t_max)?;
    let tols = Tolerances {
        rtol: tol,
        atol: tol,
        ..Tolerances::default()
    };
    let y0 = [1.0, 0.0, 0.0, 1.0, 0.0];
    let forward = integrate(rhs(model), 0.0, y0, t_max, &tols)?;
    let backward = integrate(rhs(model), 0.0, y0, -t_max, &tols)?;

    let mut samples = Vec::with_capacity(forward.steps.len() + backward.steps.len() + 1);
    for step in backward.steps.iter().rev() {
        samples.push(ClassicalState::from_vec(step.t1(), step.end()));
    }
    samples.push(ClassicalState::from_vec(0.0, y0));
    for step in &forward.steps {
        samples.push(ClassicalState::from_vec(step.t1(), step.end()));
    }

    let (z1p, d1p) = bracket_zeros(&forward, 0);
    let (z1n, d1n) = bracket_zeros(&backward, 0);
    let (z2p, _) = bracket_zeros(&forward, 2);
    let (z2n, _) = bracket_zeros(&backward, 2);
    let mut degenerate = d1p;
    degenerate.extend(d1n);

    let budget = 100.0 * tol;
    let mut residuals = Vec::with_capacity(samples.len());
    for s in &samples {
        let r = s.wronskian_residual();
        if !(r <= budget) {
            return Err(Error::WronskianBudget {
                t: s.t,
                residual: r,
                budget,
            });
        }
        residuals.push(r);
    }

    let mut sol = ClassicalSolution {
        model: model.clone(),
        t_max,
        tol,
        forward,
        backward,
        samples,
        zero_count: Vec::new(),
        residuals,
        zeta1_zeros_pos: z1p,
        zeta1_zeros_neg: z1n,
        zeta2_zeros_pos: z2p,
        zeta2_zeros_neg: z2n,
        degenerate_zeros: degenerate,
    };
    sol.zero_count = sol.samples.iter().map(|s| sol.zeta1_zero_count(s.t)).collect();
    Ok(sol)
}

fn count_within(zeros: &[f64], t: f64) -> usize {
    // `zeros` is ordered by increasing |t|.
    zeros.partition_point(|z| z.abs() <= t.abs())
}

fn count_strictly_within(zeros: &[f64], t: f64) -> usize {
    zeros.partition_point(|z| z.abs() < t.abs())
}

impl ClassicalSolution {
    pub fn model(&self) -> &SigmaModel {
        &self.model
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    /// Accepted step endpoints, increasing, including 0.
    pub fn samples(&self) -> &[ClassicalState] {
        &self.samples
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn zero_counts(&self) -> &[usize] {
        &self.zero_count
    }

    pub fn wronskian_residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn max_wronskian_residual(&self) -> f64 {
        self.residuals.iter().cloned().fold(0.0, f64::max)
    }

    /// Zeros of `ζ₁` at which `ζ₁'` is also (numerically) zero.
    pub fn degenerate_zeros(&self) -> &[f64] {
        &self.degenerate_zeros
    }

    /// Zeros of `ζ₁`, sorted increasingly.
    pub fn zeta1_zeros(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.zeta1_zeros_neg.iter().rev().cloned().collect();
        v.extend(&self.zeta1_zeros_pos);
        v
    }

    /// Zeros of `ζ₂` other than `t = 0`, sorted increasingly.
    pub fn zeta2_zeros(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.zeta2_zeros_neg.iter().rev().cloned().collect();
        v.extend(&self.zeta2_zeros_pos);
        v
    }

    fn check(&self, t: f64) -> Result<()> {
        if !(t.abs() <= self.t_max) {
            return Err(Error::OutsideWindow {
                t,
                lo: -self.t_max,
                hi: self.t_max,
            });
        }
        Ok(())
    }

    /// Dense-output evaluation at arbitrary `t` in the window.
    pub fn state(&self, t: f64) -> Result<ClassicalState> {
        self.check(t)?;
        let traj = if t >= 0.0 { &self.forward } else { &self.backward };
        let y = traj.evaluate(t).ok_or(Error::OutsideWindow {
            t,
            lo: -self.t_max,
            hi: self.t_max,
        })?;
        Ok(ClassicalState::from_vec(t, y))
    }

    /// `ν(t)`: zeros of `ζ₁` in `[0, t]` (or `[t, 0]`).
    pub fn zeta1_zero_count(&self, t: f64) -> usize {
        if t >= 0.0 {
            count_within(&self.zeta1_zeros_pos, t)
        } else {
            count_within(&self.zeta1_zeros_neg, t)
        }
    }

    /// Zeros of `ζ₂` strictly between 0 and `t`.
    pub fn zeta2_zero_count_strict(&self, t: f64) -> usize {
        if t >= 0.0 {
            count_strictly_within(&self.zeta2_zeros_pos, t)
        } else {
            count_strictly_within(&self.zeta2_zeros_neg, t)
        }
    }

    /// `min a₁` and `max a₁` over the sampled times in `[-T, T]`.
    pub fn a1_range(&self, t_abs: f64) -> (f64, f64) {
        self.samples
            .iter()
            .filter(|s| s.t.abs() <= t_abs)
            .map(ClassicalState::a1)
            .fold((f64::INFINITY, 0.0), |(lo, hi), a| (lo.min(a), hi.max(a)))
    }

    /// `C_T` with `a₁ ∈ [1/C_T, C_T]` on `[-T, T]`.
    pub fn a1_bound(&self, t_abs: f64) -> f64 {
        let (lo, hi) = self.a1_range(t_abs);
        hi.max(1.0 / lo)
    }

    /// CSV export with columns `t,zeta1,zeta1p,zeta2,zeta2p,nu,wronskian_residual`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,zeta1,zeta1p,zeta2,zeta2p,nu,wronskian_residual\n");
        for ((s, nu), r) in self.samples.iter().zip(&self.zero_count).zip(&self.residuals) {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                s.t, s.zeta1, s.zeta1p, s.zeta2, s.zeta2p, nu, r
            );
        }
        out
    }
}

/// Free function form of [`ClassicalSolution::zeta1_zero_count`].
pub fn count_zeta1_zeros(sol: &ClassicalSolution, t: f64) -> Result<usize> {
    sol.check(t)?;
    Ok(sol.zeta1_zero_count(t))
}

/// Every factorization coefficient set computable at `t`.
pub fn factor_coefficients(sol: &ClassicalSolution, t: f64, band: f64) -> Result<FactorCoefficients> {
    let s = sol.state(t)?;
    let z1_ok = !in_band(s.zeta1, t, band);
    let z2_ok = !in_band(s.zeta2, t, band);
    let z2p_ok = !in_band(s.zeta2p, t, band);
    let korotyaev = z1_ok.then(|| KorotyaevCoefficients {
        chirp: s.zeta1p / (2.0 * s.zeta1),
        log_abs_zeta1: s.zeta1.abs().ln(),
        free: s.zeta2 / (2.0 * s.zeta1),
        nu: sol.zeta1_zero_count(t),
    });
    let quadratic_phase = z2_ok.then(|| QuadraticPhaseCoefficients {
        a: (1.0 - s.zeta2p) / (2.0 * s.zeta2),
        b: s.zeta2 / 2.0,
        c: (1.0 - s.zeta1) / (2.0 * s.zeta2),
    });
    let mdfm = (z1_ok && z2_ok && z2p_ok).then(|| MdfmCoefficients {
        outer: s.zeta2 / s.zeta2p,
        dilation: s.zeta2,
        inner: s.zeta2 / s.zeta1,
    });
    Ok(FactorCoefficients {
        state: s,
        korotyaev,
        quadratic_phase,
        mdfm,
        mdmdfm: MdmdfmCoefficients {
            a1: s.a1(),
            a2: s.a2(),
            theta: s.theta,
        },
    })
}

/// Slope of `log|ζ₂|` against `log t` on `[lo, hi]` (both positive).
pub fn zeta2_growth_exponent(sol: &ClassicalSolution, lo: f64, hi: f64, points: usize) -> Result<LineFit> {
    let ts = log_space(lo, hi, points);
    let mut ys = Vec::with_capacity(ts.len());
    for &t in &ts {
        ys.push(sol.state(t)?.zeta2.abs());
    }
    fit_loglog(&ts, &ys)
}

/// Fitted `δ₀` from `|ζ₁/ζ₂| ~ t^{-δ₀}` on `[lo, hi]`.
pub fn fit_delta0(sol: &ClassicalSolution, lo: f64, hi: f64, points: usize) -> Result<LineFit> {
    let ts = log_space(lo, hi, points);
    let mut ys = Vec::with_capacity(ts.len());
    for &t in &ts {
        let s = sol.state(t)?;
        ys.push((s.zeta1 / s.zeta2).abs());
    }
    let mut f = fit_loglog(&ts, &ys)?;
    f.slope = -f.slope;
    Ok(f)
}

/// Fitted `δ₁` from the short-range margin `|ζ₂|^{-nρ_S/2} t^{1+δ₁} ≤ C`:
/// if `|ζ₂|^{-nρ_S/2} ~ t^{-q}` then the largest admissible `δ₁` is `q − 1`.
pub fn fit_delta1(
    sol: &ClassicalSolution,
    dim: usize,
    rho_s: f64,
    lo: f64,
    hi: f64,
    points: usize,
) -> Result<LineFit> {
    let ts = log_space(lo, hi, points);
    let mut ys = Vec::with_capacity(ts.len());
    for &t in &ts {
        ys.push(sol.state(t)?.zeta2.abs().powf(-(dim as f64) * rho_s / 2.0));
    }
    let mut f = fit_loglog(&ts, &ys)?;
    f.slope = -f.slope - 1.0;
    Ok(f)
}
