//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::random_field;
use hillnls::classical::solve_fundamental;
use hillnls::compare::{canonicalize, compare_fields};
use hillnls::config::{Expectation, NormChoice, SigmaSection};
use hillnls::diagnostics::pseudo_energy_norm;
use hillnls::field::{Grid, WaveField};
use hillnls::nls::{evolve, picard_verify, EvolutionConfig, NonlinearitySpec};
use hillnls::propagator::{
    crank_nicolson_linear, propagate, propagate_with, pullback_with, reference_chirp, FactorizationKind,
    PropagatorOptions,
};
use hillnls::run::{analyze, evaluate, Analysis};
use hillnls::scenario::find;
use hillnls::sigma::SigmaModel;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64).collect()
}

/// σ models used by the preset registry.
fn preset_models() -> Vec<SigmaModel> {
    vec![
        SigmaModel::Zero,
        SigmaModel::inverse_square(0.0).unwrap(),
        SigmaModel::inverse_square(0.15).unwrap(),
        SigmaModel::Constant(-1.0),
        SigmaModel::Constant(1.0),
    ]
}

/// The four models of the factorization checks: free, both constant signs, slowed dispersion.
fn factorization_models() -> Vec<SigmaModel> {
    vec![
        SigmaModel::Zero,
        SigmaModel::Constant(-1.0),
        SigmaModel::Constant(1.0),
        SigmaModel::inverse_square(0.15).unwrap(),
    ]
}

fn outcome(e: &Expectation, a: &Analysis) -> (bool, String) {
    let o = evaluate(e, a);
    (o.pass, format!("{}: {}", o.expectation, o.detail))
}

fn collect(parts: Vec<(bool, String)>) -> Verdict {
    let pass = parts.iter().all(|p| p.0);
    Verdict::new(pass, parts.into_iter().map(|p| p.1).collect::<Vec<_>>().join("; "))
}

fn classical_closed_forms() -> Verdict {
    let mut worst_closed = 0.0f64;
    let neg = solve_fundamental(&SigmaModel::Constant(-1.0), 20.0, 1e-12).unwrap();
    let free = solve_fundamental(&SigmaModel::Zero, 20.0, 1e-12).unwrap();
    for t in linspace(0.0, 20.0, 2001) {
        let s = neg.state(t).unwrap();
        worst_closed = worst_closed.max(rel(s.zeta1, t.cosh()));
        if t > 0.0 {
            worst_closed = worst_closed.max(rel(s.zeta2, t.sinh()));
        }
        let s = free.state(t).unwrap();
        worst_closed = worst_closed.max(rel(s.zeta1, 1.0));
        if t > 0.0 {
            worst_closed = worst_closed.max(rel(s.zeta2, t));
        }
    }
    let mut worst_wronskian = 0.0f64;
    for model in preset_models() {
        let sol = solve_fundamental(&model, 50.0, 1e-12).unwrap();
        for t in linspace(-50.0, 50.0, 4001) {
            worst_wronskian = worst_wronskian.max(sol.state(t).unwrap().wronskian_residual());
        }
    }
    Verdict::new(
        worst_closed < 1e-8 && worst_wronskian < 1e-9,
        format!("closed-form rel err {worst_closed:.2e} (< 1e-8), Wronskian residual {worst_wronskian:.2e} (< 1e-9)"),
    )
}

const FACTOR_TIMES: [f64; 4] = [0.5, 1.0, 2.0, 5.0];
const FIELDS: u64 = 20;

fn factorization_equivalence() -> Verdict {
    let grid = Grid::new(1, 4096, 60.0).unwrap();
    let opts = PropagatorOptions::default();
    let mut worst_pair = 0.0f64;
    let mut pairs = 0usize;
    let mut undefined = Vec::new();
    for model in factorization_models() {
        let sol = solve_fundamental(&model, 6.0, 1e-12).unwrap();
        for &t in &FACTOR_TIMES {
            let beta = reference_chirp(&sol, t).unwrap();
            let mut defined_here = 0usize;
            for seed in 0..FIELDS {
                let f = random_field(grid, 1000 + seed);
                let results: Vec<WaveField> = FactorizationKind::EXPLICIT
                    .iter()
                    .filter_map(|&k| propagate_with(&sol, t, &f, k, &opts).ok().map(|p| p.field))
                    .collect();
                defined_here = defined_here.max(results.len());
                for i in 0..results.len() {
                    for j in i + 1..results.len() {
                        let d = compare_fields(&results[i], &results[j], beta).unwrap().relative;
                        worst_pair = worst_pair.max(d);
                        pairs += 1;
                    }
                }
            }
            if defined_here < 2 {
                undefined.push(format!("{model}@t={t}"));
            }
        }
    }

    // Crank–Nicolson oracle: the implicit solve contracts only while
    // dt·max|V|/2 < 1 with V growing like L², so the box is as wide as the
    // t = 5 spread needs and no wider.
    let cn_grid = Grid::new(1, 2048, 48.0).unwrap();
    let (dt, dt2) = (5e-4, 2.5e-4);
    let mut worst_extrap = 0.0f64;
    let mut ratios = Vec::new();
    let mut oracle_failures = Vec::new();
    for (m, model) in factorization_models().into_iter().enumerate() {
        let sol = solve_fundamental(&model, 6.0, 1e-12).unwrap();
        let f = random_field(cn_grid, 2000 + m as u64);
        let (mut coarse, mut fine, mut t0) = (f.clone(), f.clone(), 0.0);
        for &t in &FACTOR_TIMES {
            let step = crank_nicolson_linear(&model, t0, t, dt, &coarse)
                .and_then(|c| crank_nicolson_linear(&model, t0, t, dt2, &fine).map(|g| (c, g)));
            let Ok((c, g)) = step else {
                oracle_failures.push(format!("{model}@t={t}"));
                break;
            };
            (coarse, fine, t0) = (c, g, t);
            let exact = match propagate(&sol, t, &f, FactorizationKind::Auto)
                .and_then(|u| canonicalize(&u, reference_chirp(&sol, t)?))
            {
                Ok(u) => u,
                Err(_) => {
                    undefined.push(format!("{model}@t={t} (oracle grid)"));
                    continue;
                }
            };
            if exact.edge_fraction() > 1e-6 {
                undefined.push(format!("{model}@t={t} (leaves oracle box)"));
                continue;
            }
            let d1 = coarse.distance(&exact).unwrap() / exact.l2_norm();
            let d2 = fine.distance(&exact).unwrap() / exact.l2_norm();
            let extrap = fine.scaled((4.0 / 3.0).into()).sub(&coarse.scaled((1.0 / 3.0).into())).unwrap();
            worst_extrap = worst_extrap.max(extrap.distance(&exact).unwrap() / exact.l2_norm());
            ratios.push(d1 / d2);
        }
    }
    let ratio_lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let ratio_hi = ratios.iter().cloned().fold(0.0, f64::max);
    let second_order = !ratios.is_empty() && ratio_lo >= 3.2 && ratio_hi <= 4.8;
    let mut detail = format!(
        "pairwise max {worst_pair:.2e} over {pairs} pairs (< 1e-8); CN dt-ratio in [{ratio_lo:.2}, {ratio_hi:.2}] over {} cases (second order: [3.2, 4.8]); extrapolated diff {worst_extrap:.2e} (< 1e-4)",
        ratios.len()
    );
    if !undefined.is_empty() {
        detail.push_str(&format!("; undefined: {}", undefined.join(", ")));
    }
    if !oracle_failures.is_empty() {
        detail.push_str(&format!("; oracle failed: {}", oracle_failures.join(", ")));
    }
    Verdict::new(
        pairs > 0 && worst_pair < 1e-8 && second_order && worst_extrap < 1e-4 && oracle_failures.is_empty(),
        detail,
    )
}

fn unitarity_round_trip() -> Verdict {
    let grid = Grid::new(1, 4096, 60.0).unwrap();
    let opts = PropagatorOptions::default();
    let (mut drift, mut round, mut applications) = (0.0f64, 0.0f64, 0usize);
    for model in factorization_models() {
        let sol = solve_fundamental(&model, 6.0, 1e-12).unwrap();
        for &t in &FACTOR_TIMES {
            for seed in 0..FIELDS {
                let f = random_field(grid, 3000 + seed);
                for kind in FactorizationKind::EXPLICIT {
                    let Ok(p) = propagate_with(&sol, t, &f, kind, &opts) else { continue };
                    drift = drift.max((p.field.l2_norm() / f.l2_norm() - 1.0).abs());
                    let back = pullback_with(&sol, t, &p.field, kind, &opts).unwrap().field;
                    drift = drift.max((back.l2_norm() / p.field.l2_norm() - 1.0).abs());
                    round = round.max(back.distance(&f).unwrap() / f.l2_norm());
                    applications += 2;
                }
            }
        }
    }
    Verdict::new(
        applications > 0 && drift < 1e-10 && round < 1e-9,
        format!("norm drift {drift:.2e} (< 1e-10) over {applications} applications; round trip {round:.2e} (< 1e-9)"),
    )
}

fn pseudo_energy_intertwining() -> Verdict {
    let grid = Grid::new(1, 4096, 60.0).unwrap();
    let u0 = WaveField::gaussian(grid, 1.0, 0.0, 0.0);
    let times = linspace(0.0, 10.0, 101);
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for model in preset_models() {
        let sol = solve_fundamental(&model, 10.0, 1e-12).unwrap();
        let e0 = pseudo_energy_norm(&sol, 0.0, &u0, 1.0).unwrap();
        let mut drift = 0.0f64;
        for &t in &times {
            let u = propagate(&sol, t, &u0, FactorizationKind::Auto).unwrap();
            drift = drift.max(rel(pseudo_energy_norm(&sol, t, &u, 1.0).unwrap(), e0));
        }
        worst = worst.max(drift);
        parts.push(format!("{model} {drift:.1e}"));
    }
    Verdict::new(worst < 1e-6, format!("max relative drift {worst:.2e} (< 1e-6): {}", parts.join(", ")))
}

fn decay_exponents() -> Verdict {
    let mut parts = Vec::new();
    for name in ["free-linear", "inverse-square-0.15-linear", "constant-negative-linear"] {
        let cfg = find(name).unwrap().config;
        let a = analyze(&cfg).unwrap();
        for e in cfg.expect.iter().filter(|e| {
            matches!(e, Expectation::DecaySlopeT { .. } | Expectation::DecaySlopeZeta2 { .. })
        }) {
            let (pass, detail) = outcome(e, &a);
            parts.push((pass, format!("{name} {detail}")));
        }
    }
    collect(parts)
}

fn small_data_long_range(cubic: &Analysis) -> Verdict {
    collect(vec![outcome(
        &Expectation::Envelope { factor: 10.0, tail_from: 20.0, slope_lo: -0.1, slope_hi: 0.02 },
        cubic,
    )])
}

fn modified_scattering(cubic: &Analysis, short: &Analysis) -> Verdict {
    collect(vec![
        outcome(&Expectation::CauchyCorrectedMax { norm: NormChoice::Linf, max: -0.2 }, cubic),
        outcome(&Expectation::CauchyGapMin { norm: NormChoice::Linf, gap: 0.3 }, cubic),
        {
            let (p, d) = outcome(&Expectation::CauchyUncorrectedMax { norm: NormChoice::Linf, max: -0.2 }, short);
            (p, format!("short-range {d}"))
        },
    ])
}

fn contraction() -> Verdict {
    let cfg = find("inverse-square-0.15-cubic")
        .unwrap()
        .config
        .with_overrides(&["grid.half_width=60".into()])
        .unwrap();
    let u0 = cfg.initial_field().unwrap();
    let model = cfg.sigma_model().unwrap();
    let sol = solve_fundamental(&model, 1.0, 1e-12).unwrap();
    let nl = NonlinearitySpec::new(1.0, 0.0, 2.0, 3.0).unwrap();
    let ev = EvolutionConfig::new(model, nl, u0, 0.5, 1e-3);
    let rep = picard_verify(&sol, &ev, 0.5, 6, 128).unwrap();
    let ratios = rep.ratios();
    let contracting = ratios.iter().take_while(|&&r| r < 0.5).count();
    let tr = evolve(&ev).unwrap();
    let d = rep.fixed_point.distance(&tr.last().unwrap().field).unwrap() / rep.fixed_point.l2_norm();
    Verdict::new(
        contracting >= 4 && d < 1e-4,
        format!(
            "{contracting} consecutive ratios < 1/2 (need 4): {}; fixed point vs split-step {d:.2e} (< 1e-4)",
            ratios.iter().map(|r| format!("{r:.1e}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn splitting(cubic: &Analysis) -> Verdict {
    collect(vec![outcome(&Expectation::SplitRate { rel_tol: 0.3 }, cubic)])
}

fn self_convergence() -> Verdict {
    let nonlinear = find("constant-negative-short-range").unwrap().config;
    let linear = nonlinear.with_overrides(&["nonlinearity.mu=0".into()]).unwrap();
    let mut slowed = linear.clone();
    slowed.sigma = SigmaSection { model: "inverse-square".into(), value: None, k: Some(0.15), regularization: None, table: None };
    let mut parts = Vec::new();
    for (label, cfg) in [("linear σ≡-1", linear), ("linear σ~0.15t^-2", slowed), ("nonlinear σ≡-1", nonlinear)] {
        let a = analyze(&cfg).unwrap();
        let (pass, detail) = outcome(&Expectation::SelfConvergence { lo: 3.2, hi: 4.8 }, &a);
        parts.push((pass, format!("{label} {detail}")));
    }
    collect(parts)
}

fn main() -> ExitCode {
    let mut results: Vec<(usize, &str, Verdict, f64)> = Vec::new();
    let mut record = |id: usize, name: &'static str, f: &dyn Fn() -> Verdict| {
        let start = Instant::now();
        let v = f();
        let secs = start.elapsed().as_secs_f64();
        println!("{} {id:>2} {name} [{secs:.1}s]: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        results.push((id, name, v, secs));
    };

    record(1, "classical closed forms", &classical_closed_forms);
    record(2, "factorization equivalence", &factorization_equivalence);
    record(3, "unitarity and round trip", &unitarity_round_trip);
    record(4, "pseudo-energy intertwining", &pseudo_energy_intertwining);
    record(5, "dispersive decay exponents", &decay_exponents);

    let cubic_start = Instant::now();
    let cubic = analyze(&find("inverse-square-0.15-cubic").unwrap().config).unwrap();
    let short = analyze(&find("inverse-square-0.15-short-range").unwrap().config).unwrap();
    println!("     (long-range and short-range runs took {:.1}s)", cubic_start.elapsed().as_secs_f64());
    record(6, "small-data decay envelope", &|| small_data_long_range(&cubic));
    record(7, "modified scattering", &|| modified_scattering(&cubic, &short));
    record(8, "contraction verification", &contraction);
    record(9, "L-infinity splitting rate", &|| splitting(&cubic));
    record(10, "self-convergence", &self_convergence);

    let failed: Vec<_> = results.iter().filter(|r| !r.2.pass).map(|r| r.0.to_string()).collect();
    println!("acceptance: {}/{} criteria passed", results.len() - failed.len(), results.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {}", failed.join(", "));
        ExitCode::FAILURE
    }
}
