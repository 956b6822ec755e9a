//! Named preset runs.

use crate::config::{
    DiagnosticsSection, Expectation, GridSection, InitialSection, NonlinearitySection, NormChoice, RunConfig,
    SigmaSection, Spacing, TimeMode, TimeSection,
};
use crate::error::{Error, Result};
use crate::sigma::inverse_square_lambda;

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: &'static str,
    pub description: &'static str,
    pub config: RunConfig,
}

/// Small-data budget for `‖u₀‖_{1,0} + ‖u₀‖_{0,1}` used by every nonlinear preset.
pub const SMALL_DATA_EPSILON: f64 = 0.05;

fn sigma(model: &str) -> SigmaSection {
    SigmaSection { model: model.into(), value: None, k: None, regularization: None, table: None }
}

fn constant(c: f64) -> SigmaSection {
    SigmaSection { value: Some(c), ..sigma("constant") }
}

fn inverse_square(k: f64) -> SigmaSection {
    SigmaSection { k: Some(k), ..sigma("inverse-square") }
}

fn linear_config(sigma: SigmaSection, t_end: f64, samples: usize, spacing: Spacing) -> RunConfig {
    RunConfig {
        name: String::new(),
        description: String::new(),
        sigma,
        nonlinearity: NonlinearitySection::default(),
        grid: GridSection { dim: 1, points: 4096, half_width: 60.0 },
        initial: InitialSection::default(),
        time: TimeSection {
            t_end,
            dt: 1e-3,
            r0: 1.0,
            samples,
            spacing,
            times: None,
            mode: TimeMode::Propagator,
            classical_tol: 1e-12,
        },
        // γ = 1 keeps the pseudo-energy check at the n = 1 small-data exponent.
        diagnostics: DiagnosticsSection { gamma: 1.0, alpha: 0.2, ..DiagnosticsSection::default() },
        expect: vec![
            // Exact unitarity of every factor.
            Expectation::MassDriftMax { max: 1e-10 },
            // The pseudo-energy operator is conjugate to x² along the linear flow.
            Expectation::PseudoEnergyDriftMax { max: 1e-6 },
        ],
    }
}

/// Small Gaussian data on a box wide enough for `t ≤ 200` of dispersion.
fn nonlinear_config(sigma: SigmaSection, nonlinearity: NonlinearitySection) -> RunConfig {
    RunConfig {
        name: String::new(),
        description: String::new(),
        sigma,
        nonlinearity,
        grid: GridSection { dim: 1, points: 4096, half_width: 800.0 },
        initial: InitialSection { epsilon: Some(SMALL_DATA_EPSILON), ..InitialSection::default() },
        time: TimeSection {
            t_end: 200.0,
            dt: 1e-3,
            r0: 1.0,
            samples: 200,
            spacing: Spacing::Log,
            times: None,
            mode: TimeMode::SplitStep,
            classical_tol: 1e-12,
        },
        diagnostics: DiagnosticsSection::default(),
        expect: vec![
            Expectation::Completes,
            // Every split step is a product of unimodular multipliers.
            Expectation::MassDriftMax { max: 1e-10 },
            // Small-data decay at the linear rate: bounded envelope, no late growth.
            Expectation::Envelope { factor: 10.0, tail_from: 20.0, slope_lo: -0.1, slope_hi: 0.02 },
        ],
    }
}

/// Free dispersion spreads the packet like `t`; on the `L = 800` box the
/// Gaussian tail wraps around beyond `t ≈ 100`, so these runs stop there.
fn free_dispersion(mut c: RunConfig) -> RunConfig {
    c.time.t_end = 100.0;
    c.time.samples = 150;
    c.diagnostics.fit_window = [5.0, 50.0];
    c
}

fn short_range() -> NonlinearitySection {
    NonlinearitySection { nu: 0.0, mu: 1.0, rho_l: 2.0, rho_s: 3.0 }
}

fn long_range(rho_l: f64) -> NonlinearitySection {
    NonlinearitySection { nu: 1.0, mu: 0.0, rho_l, rho_s: 3.0 }
}

fn named(name: &'static str, description: &'static str, mut config: RunConfig) -> Scenario {
    config.name = name.into();
    config.description = description.into();
    Scenario { name, description, config }
}

fn free_linear() -> Scenario {
    let mut c = linear_config(sigma("zero"), 1e4, 60, Spacing::Log);
    c.diagnostics.decay_window = Some([100.0, 1e4]);
    // Free Gaussian: ‖u(t)‖_∞ = (1+t²)^{−1/4} exactly.
    c.expect.push(Expectation::DecaySlopeT { target: -0.5, rel_tol: 0.03 });
    named("free-linear", "σ ≡ 0, linear Gaussian, decay t^{-1/2}", c)
}

fn free_short_range() -> Scenario {
    let mut c = free_dispersion(nonlinear_config(sigma("zero"), short_range()));
    // Above the threshold 1 + 2/n the profile converges without correction.
    c.expect.push(Expectation::CauchyUncorrectedMax { norm: NormChoice::Linf, max: -0.2 });
    named("free-short-range", "σ ≡ 0, quartic short-range power |u|³u", c)
}

fn free_long_range() -> Scenario {
    let mut c = free_dispersion(nonlinear_config(sigma("zero"), long_range(2.0)));
    // At the threshold ρ_L = 2/n only the phase-corrected profile converges.
    c.expect.push(Expectation::CauchyCorrectedMax { norm: NormChoice::Linf, max: -0.2 });
    c.expect.push(Expectation::CauchyGapMin { norm: NormChoice::Linf, gap: 0.3 });
    named("free-long-range", "σ ≡ 0, cubic long-range power |u|²u", c)
}

fn inverse_square_zero_linear() -> Scenario {
    let mut c = linear_config(inverse_square(0.0), 1e4, 60, Spacing::Log);
    c.diagnostics.decay_window = Some([100.0, 1e4]);
    // k = 0 gives λ = 0 and the free rate.
    c.expect.push(Expectation::DecaySlopeT { target: -0.5, rel_tol: 0.03 });
    named("inverse-square-0-linear", "σ = k-profile with k = 0, linear Gaussian", c)
}

fn inverse_square_zero_long_range() -> Scenario {
    let mut c = free_dispersion(nonlinear_config(inverse_square(0.0), long_range(2.0)));
    c.expect.push(Expectation::CauchyCorrectedMax { norm: NormChoice::Linf, max: -0.2 });
    named("inverse-square-0-long-range", "σ = k-profile with k = 0, long-range ρ_L = 2", c)
}

fn inverse_square_linear() -> Scenario {
    let mut c = linear_config(inverse_square(0.15), 1e4, 60, Spacing::Log);
    c.diagnostics.decay_window = Some([100.0, 1e4]);
    // Dispersion slows to t^{−n(1−λ)/2}.
    let lambda = inverse_square_lambda(0.15);
    c.expect.push(Expectation::DecaySlopeT { target: -(1.0 - lambda) / 2.0, rel_tol: 0.05 });
    named("inverse-square-0.15-linear", "σ ~ 0.15 t^{-2}, linear Gaussian, decay t^{-(1-λ)/2}", c)
}

fn inverse_square_short_range() -> Scenario {
    let mut c = nonlinear_config(inverse_square(0.15), short_range());
    c.expect.push(Expectation::CauchyUncorrectedMax { norm: NormChoice::Linf, max: -0.2 });
    named("inverse-square-0.15-short-range", "σ ~ 0.15 t^{-2}, short-range |u|³u", c)
}

fn inverse_square_long_range() -> Scenario {
    // Threshold power for the slowed dispersion: ρ_L = 2/(n(1−λ)).
    let lambda = inverse_square_lambda(0.15);
    let mut c = nonlinear_config(inverse_square(0.15), long_range(2.0 / (1.0 - lambda)));
    c.expect.push(Expectation::CauchyCorrectedMax { norm: NormChoice::Linf, max: -0.2 });
    named("inverse-square-0.15-long-range", "σ ~ 0.15 t^{-2}, long-range at ρ_L = 2/(n(1-λ))", c)
}

fn inverse_square_cubic() -> Scenario {
    let mut c = nonlinear_config(inverse_square(0.15), long_range(2.0));
    c.expect.push(Expectation::CauchyCorrectedMax { norm: NormChoice::Linf, max: -0.2 });
    c.expect.push(Expectation::CauchyGapMin { norm: NormChoice::Linf, gap: 0.3 });
    // The remainder of the L^∞ splitting shrinks like |ζ₁/ζ₂|^α ~ t^{−δ₀α}.
    c.expect.push(Expectation::SplitRate { rel_tol: 0.3 });
    named("inverse-square-0.15-cubic", "σ ~ 0.15 t^{-2}, cubic |u|²u; paired with the short-range run", c)
}

fn constant_negative_linear() -> Scenario {
    let mut c = linear_config(constant(-1.0), 12.0, 45, Spacing::Linear);
    c.diagnostics.decay_window = Some([5.0, 12.0]);
    // ζ₂ = sinh t; the decay follows (1+|sinh t|)^{−1/2}.
    c.expect.push(Expectation::DecaySlopeZeta2 { target: -0.5, rel_tol: 0.03 });
    named("constant-negative-linear", "σ ≡ -1, linear Gaussian, decay (1+|sinh t|)^{-1/2}", c)
}

fn constant_negative_short_range() -> Scenario {
    // The repulsive flow stretches the packet like sinh t while its chirp
    // steepens like cosh t; t ≤ 3 stays resolved on this grid.
    let mut c = nonlinear_config(constant(-1.0), short_range());
    c.grid.half_width = 60.0;
    c.time = TimeSection { t_end: 3.0, samples: 40, spacing: Spacing::Linear, ..c.time };
    c.diagnostics.fit_window = [1.0, 3.0];
    c.diagnostics.self_convergence = true;
    c.expect = vec![
        Expectation::Completes,
        Expectation::MassDriftMax { max: 1e-10 },
        // Strang splitting is second order in dt.
        Expectation::SelfConvergence { lo: 3.2, hi: 4.8 },
    ];
    named("constant-negative-short-range", "σ ≡ -1, short-range |u|³u on a short horizon", c)
}

fn constant_positive_linear() -> Scenario {
    let c = linear_config(constant(1.0), 20.0, 40, Spacing::Linear);
    named("constant-positive-linear", "σ ≡ +1, linear diagnostics only (periodic focusing)", c)
}

/// The preset registry. Constant-negative with a long-range power is
/// deliberately absent: that model has no long-range scattering theory.
pub fn presets() -> Vec<Scenario> {
    vec![
        free_linear(),
        free_short_range(),
        free_long_range(),
        inverse_square_zero_linear(),
        inverse_square_zero_long_range(),
        inverse_square_linear(),
        inverse_square_short_range(),
        inverse_square_long_range(),
        inverse_square_cubic(),
        constant_negative_linear(),
        constant_negative_short_range(),
        constant_positive_linear(),
    ]
}

pub fn find(name: &str) -> Result<Scenario> {
    presets()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::Parse(format!("unknown scenario '{name}'")))
}
