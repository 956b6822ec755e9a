//! Run orchestration: classical solve, evolution, diagnostics, persistence.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classical::{fit_delta0, solve_fundamental, ClassicalSolution};
use crate::config::{Expectation, ResolvedRun, RunConfig, TimeMode};
use crate::diagnostics::{cauchy_rates, decay_fit, CauchyRates, DecayFit, NormKind, ProfileSeries, RateFit};
use crate::error::{Error, Result};
use crate::fit::{fit_line, fit_loglog, LineFit};
use crate::io::{phase_to_csv, table_to_csv, time_file_name, write_field};
use crate::nls::{evolve, EvolutionConfig, Failure, Snapshot, Trajectory};
use crate::propagator::{propagate, FactorizationKind};

/// Environment variable that overrides the default output root.
pub const OUT_ENV: &str = "HILLNLS_OUT";
pub const DEFAULT_OUT: &str = "hillnls-out";

pub const SERIES_COLUMNS: [&str; 11] = [
    "t",
    "l2",
    "linf",
    "h_gamma0",
    "h_0gamma",
    "pseudo_energy",
    "zeta2_abs",
    "main_term",
    "remainder_bound",
    "cauchy_l2",
    "cauchy_linf",
];

/// `--out`, else `$HILLNLS_OUT`, else `./hillnls-out`.
pub fn output_root(explicit: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(DEFAULT_OUT),
    }
}

pub fn runs_dir(root: &Path) -> PathBuf {
    root.join("runs")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauchySummary {
    pub reference_time: f64,
    pub corrected: RateFit,
    pub uncorrected: RateFit,
}

impl From<&CauchyRates> for CauchySummary {
    fn from(r: &CauchyRates) -> Self {
        Self { reference_time: r.reference_time, corrected: r.corrected_fit, uncorrected: r.uncorrected_fit }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSummary {
    /// `(1+|ζ₂|)^{n/2}‖u‖_∞` at the first sample.
    pub first: f64,
    pub sup: f64,
    /// Largest `e(t₂)/e(t₁)` over samples `2r₀ ≤ t₁ < t₂`.
    pub max_late_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    /// Slope of `log(remainder/main)` vs `log t` on the fit window.
    pub ratio_fit: LineFit,
    pub delta0: f64,
    /// `−δ₀α`.
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfConvergence {
    pub dts: [f64; 3],
    /// `‖u_{dt} − u_{dt/2}‖₂` and `‖u_{dt/2} − u_{dt/4}‖₂` at `t_end`.
    pub differences: [f64; 2],
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub expectation: String,
    pub pass: bool,
    /// Observed value, `NaN` if it could not be computed.
    pub value: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub run_id: String,
    pub name: String,
    pub config_hash: String,
    pub strict_fp: bool,
    pub completed: bool,
    pub failure: Option<String>,
    pub failure_time: Option<f64>,
    pub steps: usize,
    pub samples: usize,
    pub mass_drift: f64,
    pub pseudo_energy_drift: f64,
    pub decay: Option<DecayFit>,
    pub cauchy_l2: Option<CauchySummary>,
    pub cauchy_linf: Option<CauchySummary>,
    pub envelope: Option<EnvelopeSummary>,
    pub split: Option<SplitSummary>,
    pub self_convergence: Option<SelfConvergence>,
    pub expectations: Vec<Outcome>,
    pub passed: bool,
}

/// In-memory result of a run, before persistence.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub dim: usize,
    pub solution: ClassicalSolution,
    pub trajectory: Trajectory,
    pub series: Option<ProfileSeries>,
    pub cauchy_l2: Option<CauchyRates>,
    pub cauchy_linf: Option<CauchyRates>,
    pub decay: Option<DecayFit>,
    pub envelope: Option<EnvelopeSummary>,
    pub split: Option<SplitSummary>,
    pub self_convergence: Option<SelfConvergence>,
    pub pseudo_energy_drift: f64,
    /// First error hit by the evolution or the diagnostics.
    pub failure: Option<Failure>,
}

/// Snapshots from the exact propagator; stops at the first failure.
fn propagator_trajectory(sol: &ClassicalSolution, cfg: &EvolutionConfig) -> Trajectory {
    let m0 = cfg.initial.l2_norm();
    let mut snapshots = Vec::with_capacity(cfg.times.len());
    let mut mass_drift = 0.0f64;
    let mut failure = None;
    for &t in &cfg.times {
        match propagate(sol, t, &cfg.initial, FactorizationKind::Auto) {
            Ok(field) => {
                if m0 > 0.0 {
                    mass_drift = mass_drift.max((field.l2_norm() / m0 - 1.0).abs());
                }
                snapshots.push(Snapshot { t, field });
            }
            Err(error) => {
                failure = Some(Failure { t, error });
                break;
            }
        }
    }
    Trajectory { snapshots, steps: 0, mass_drift, failure }
}

/// `(1+|ζ₂|)^{n/2}‖u‖_∞` per series sample.
pub fn envelope_values(series: &ProfileSeries, dim: usize) -> Vec<(f64, f64)> {
    let half = dim as f64 / 2.0;
    series.norms.iter().map(|r| (r.t, (1.0 + r.zeta2_abs).powf(half) * r.linf)).collect()
}

fn envelope_summary(values: &[(f64, f64)], r0: f64) -> Option<EnvelopeSummary> {
    let first = values.first()?.1;
    let sup = values.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    let late: Vec<f64> = values.iter().filter(|v| v.0 >= 2.0 * r0).map(|v| v.1).collect();
    let mut max_late_ratio = 0.0f64;
    let mut running_min = f64::INFINITY;
    for &e in &late {
        if running_min.is_finite() && running_min > 0.0 {
            max_late_ratio = max_late_ratio.max(e / running_min);
        }
        running_min = running_min.min(e);
    }
    Some(EnvelopeSummary { first, sup, max_late_ratio })
}

fn split_summary(
    sol: &ClassicalSolution,
    series: &ProfileSeries,
    window: (f64, f64),
    alpha: f64,
) -> Result<SplitSummary> {
    let (x, y): (Vec<f64>, Vec<f64>) = series
        .norms
        .iter()
        .filter(|r| r.t >= window.0 && r.t <= window.1 && r.main_term > 0.0 && r.remainder_bound > 0.0)
        .map(|r| (r.t, r.remainder_bound / r.main_term))
        .unzip();
    if x.len() < 4 {
        return Err(Error::Fit(format!("only {} splitting samples in the window", x.len())));
    }
    let ratio_fit = fit_loglog(&x, &y)?;
    let delta0 = fit_delta0(sol, window.0, window.1, 64)?.slope;
    Ok(SplitSummary { ratio_fit, delta0, target: -delta0 * alpha })
}

fn self_convergence(cfg: &EvolutionConfig) -> Result<SelfConvergence> {
    let run = |dt: f64| -> Result<crate::field::WaveField> {
        let mut c = cfg.clone();
        c.dt = dt;
        c.times = vec![cfg.t_end];
        let tr = evolve(&c)?;
        if let Some(f) = tr.failure {
            return Err(f.error);
        }
        Ok(tr.snapshots.into_iter().last().expect("t_end snapshot").field)
    };
    let dts = [cfg.dt, cfg.dt / 2.0, cfg.dt / 4.0];
    let (a, b, c) = (run(dts[0])?, run(dts[1])?, run(dts[2])?);
    let differences = [a.distance(&b)?, b.distance(&c)?];
    Ok(SelfConvergence { dts, differences, ratio: differences[0] / differences[1] })
}

/// Executes the numerical pipeline. Failures of the evolution or the
/// diagnostics are recorded in [`Analysis::failure`]; an error is returned
/// for an invalid configuration or when the classical solve itself fails.
pub fn analyze(config: &RunConfig) -> Result<Analysis> {
    let resolved = config.resolve()?;
    let ResolvedRun { evolution, diagnostics, decay_window, mode, classical_tol } = resolved;
    let solution = solve_fundamental(&evolution.model, evolution.t_end, classical_tol)?;
    let trajectory = match mode {
        TimeMode::SplitStep => evolve(&evolution)?,
        TimeMode::Propagator => propagator_trajectory(&solution, &evolution),
    };
    let mut failure = trajectory.failure.clone();
    let series = match ProfileSeries::from_trajectory(&solution, &trajectory, &evolution.nonlinearity, &diagnostics) {
        Ok(s) => Some(s),
        Err(error) => {
            failure.get_or_insert(Failure { t: f64::NAN, error });
            None
        }
    };
    let window = diagnostics.fit_window;
    let dim = evolution.initial.grid().dim();
    let (mut cauchy_l2, mut cauchy_linf, mut decay, mut envelope, mut split) = (None, None, None, None, None);
    let mut pseudo_energy_drift = f64::NAN;
    if let Some(s) = &series {
        cauchy_l2 = cauchy_rates(s, NormKind::L2, window).ok();
        cauchy_linf = cauchy_rates(s, NormKind::Linf, window).ok();
        decay = decay_fit(s, decay_window).ok();
        envelope = envelope_summary(&envelope_values(s, dim), diagnostics.r0);
        split = split_summary(&solution, s, window, diagnostics.alpha_holder).ok();
        if let Some(p0) = s.norms.first().map(|r| r.pseudo_energy) {
            pseudo_energy_drift = s.norms.iter().map(|r| (r.pseudo_energy / p0 - 1.0).abs()).fold(0.0, f64::max);
        }
    }
    let mut sc = None;
    if config.diagnostics.self_convergence && mode == TimeMode::SplitStep && failure.is_none() {
        match self_convergence(&evolution) {
            Ok(v) => sc = Some(v),
            Err(error) => failure = Some(Failure { t: evolution.t_end, error }),
        }
    }
    Ok(Analysis {
        dim,
        solution,
        trajectory,
        series,
        cauchy_l2,
        cauchy_linf,
        decay,
        envelope,
        split,
        self_convergence: sc,
        pseudo_energy_drift,
        failure,
    })
}

fn relative_check(observed: f64, target: f64, rel_tol: f64) -> (bool, String) {
    let rel = ((observed - target) / target).abs();
    (rel <= rel_tol, format!("observed {observed:.5}, target {target:.5}, relative error {rel:.3e} (tol {rel_tol})"))
}

fn cauchy_for(a: &Analysis, kind: NormKind) -> Option<&CauchyRates> {
    match kind {
        NormKind::L2 => a.cauchy_l2.as_ref(),
        NormKind::Linf => a.cauchy_linf.as_ref(),
    }
}

fn missing(name: String, what: &str) -> Outcome {
    Outcome { expectation: name, pass: false, value: f64::NAN, detail: format!("{what} unavailable") }
}

pub fn evaluate(expectation: &Expectation, a: &Analysis) -> Outcome {
    let name = expectation.label();
    let done = |pass: bool, value: f64, detail: String| Outcome { expectation: name.clone(), pass, value, detail };
    match expectation {
        Expectation::DecaySlopeT { target, rel_tol } | Expectation::DecaySlopeZeta2 { target, rel_tol } => {
            let Some(d) = &a.decay else { return missing(name, "decay fit") };
            let slope = if matches!(expectation, Expectation::DecaySlopeT { .. }) { d.vs_t.slope } else { d.vs_zeta2.slope };
            let (pass, detail) = relative_check(slope, *target, *rel_tol);
            done(pass, slope, detail)
        }
        Expectation::CauchyCorrectedMax { norm, max } | Expectation::CauchyUncorrectedMax { norm, max } => {
            let Some(c) = cauchy_for(a, norm.kind()) else { return missing(name, "Cauchy fit") };
            let fit = if matches!(expectation, Expectation::CauchyCorrectedMax { .. }) { c.corrected_fit } else { c.uncorrected_fit };
            match fit {
                RateFit::Fitted(f) => done(f.slope <= *max, f.slope, format!("slope {:.4} (max {max})", f.slope)),
                RateFit::Converged => done(true, f64::NEG_INFINITY, "differences below the converged floor".into()),
            }
        }
        Expectation::CauchyGapMin { norm, gap } => {
            let Some(c) = cauchy_for(a, norm.kind()) else { return missing(name, "Cauchy fit") };
            match (c.corrected_fit.slope(), c.uncorrected_fit.slope()) {
                (Some(cs), Some(us)) => {
                    let g = us - cs;
                    done(g >= *gap, g, format!("uncorrected {us:.4} minus corrected {cs:.4} = {g:.4} (min {gap})"))
                }
                _ => done(false, f64::NAN, "a Cauchy fit converged; no slope gap".into()),
            }
        }
        Expectation::MassDriftMax { max } => {
            let m = a.trajectory.mass_drift;
            done(m <= *max, m, format!("mass drift {m:.3e} (max {max:e})"))
        }
        Expectation::PseudoEnergyDriftMax { max } => {
            let d = a.pseudo_energy_drift;
            done(d <= *max, d, format!("pseudo-energy drift {d:.3e} (max {max:e})"))
        }
        Expectation::Envelope { factor, tail_from, slope_lo, slope_hi } => {
            let Some(s) = &a.series else { return missing(name, "series") };
            let Some(env) = &a.envelope else { return missing(name, "envelope") };
            let values = envelope_values(s, a.dim);
            let (x, y): (Vec<f64>, Vec<f64>) =
                values.iter().filter(|v| v.0 >= *tail_from).map(|v| (v.0.ln(), v.1.ln())).unzip();
            let Ok(tail) = fit_line(&x, &y) else { return missing(name, "tail fit") };
            let bounded = env.sup <= factor * env.first;
            let flat = tail.slope >= *slope_lo && tail.slope <= *slope_hi;
            done(
                bounded && flat,
                tail.slope,
                format!(
                    "sup/first {:.4} (max {factor}), tail slope {:.4} in [{slope_lo}, {slope_hi}]",
                    env.sup / env.first,
                    tail.slope
                ),
            )
        }
        Expectation::SplitRate { rel_tol } => {
            let Some(s) = &a.split else { return missing(name, "splitting fit") };
            let (pass, detail) = relative_check(s.ratio_fit.slope, s.target, *rel_tol);
            done(pass, s.ratio_fit.slope, detail)
        }
        Expectation::SelfConvergence { lo, hi } => {
            let Some(s) = &a.self_convergence else { return missing(name, "self-convergence") };
            done(
                s.ratio >= *lo && s.ratio <= *hi,
                s.ratio,
                format!("ratio {:.4} in [{lo}, {hi}]", s.ratio),
            )
        }
        Expectation::Completes => match &a.failure {
            None => done(true, 1.0, "reached t_end".into()),
            Some(f) => done(false, f.t, format!("failed at t = {}: {}", f.t, f.error)),
        },
    }
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub id: String,
    pub dir: PathBuf,
    pub summary: Summary,
}

impl RunRecord {
    /// Numerical failure during evolution or diagnostics.
    pub fn failed(&self) -> bool {
        !self.summary.completed
    }
}

fn run_id(config: &RunConfig, runs: &Path) -> String {
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ");
    let base = format!("{stamp}-{}", &config.hash()[..12]);
    let mut id = base.clone();
    let mut k = 1;
    while runs.join(&id).exists() {
        id = format!("{base}-{k}");
        k += 1;
    }
    id
}

fn series_rows(a: &Analysis) -> Vec<Vec<f64>> {
    let Some(s) = &a.series else { return Vec::new() };
    let pick = |c: Option<&CauchyRates>, k: usize| c.map_or(f64::NAN, |c| c.corrected[k]);
    s.norms
        .iter()
        .enumerate()
        .map(|(k, r)| {
            vec![
                r.t,
                r.l2,
                r.linf,
                r.h_gamma0,
                r.h_0gamma,
                r.pseudo_energy,
                r.zeta2_abs,
                r.main_term,
                r.remainder_bound,
                pick(a.cauchy_l2.as_ref(), k),
                pick(a.cauchy_linf.as_ref(), k),
            ]
        })
        .collect()
}

pub const CAUCHY_COLUMNS: [&str; 7] = [
    "t",
    "corrected_l2",
    "uncorrected_l2",
    "aligned_l2",
    "corrected_linf",
    "uncorrected_linf",
    "aligned_linf",
];

fn cauchy_rows(a: &Analysis) -> Option<Vec<Vec<f64>>> {
    let (s, l2, linf) = (a.series.as_ref()?, a.cauchy_l2.as_ref()?, a.cauchy_linf.as_ref()?);
    Some(
        (0..s.len())
            .map(|k| {
                vec![
                    s.times[k],
                    l2.corrected[k],
                    l2.uncorrected[k],
                    l2.corrected_aligned[k],
                    linf.corrected[k],
                    linf.uncorrected[k],
                    linf.corrected_aligned[k],
                ]
            })
            .collect(),
    )
}

/// `count` indices spread evenly over `0..len`, always including both ends.
fn spread(len: usize, count: usize) -> Vec<usize> {
    if len == 0 || count == 0 {
        return Vec::new();
    }
    if count >= len {
        return (0..len).collect();
    }
    if count == 1 {
        return vec![len - 1];
    }
    let mut idx: Vec<usize> = (0..count).map(|k| (k * (len - 1) + (count - 1) / 2) / (count - 1)).collect();
    idx.dedup();
    idx
}

fn persist(dir: &Path, config: &RunConfig, a: &Analysis, summary: &Summary) -> Result<()> {
    fs::write(dir.join("config.toml"), config.to_toml_string())?;
    fs::write(dir.join("classical.csv"), a.solution.to_csv())?;
    fs::write(dir.join("series.csv"), table_to_csv(&SERIES_COLUMNS, &series_rows(a)))?;
    if let Some(rows) = cauchy_rows(a) {
        fs::write(dir.join("cauchy.csv"), table_to_csv(&CAUCHY_COLUMNS, &rows))?;
    }
    let count = config.diagnostics.snapshots;
    let fields = dir.join("fields");
    fs::create_dir_all(&fields)?;
    let snaps = &a.trajectory.snapshots;
    for k in spread(snaps.len(), count) {
        write_field(&fields.join(time_file_name(snaps[k].t)), &snaps[k].field)?;
    }
    if let Some(s) = &a.series {
        let (profiles, phase) = (dir.join("profiles"), dir.join("phase"));
        fs::create_dir_all(&profiles)?;
        fs::create_dir_all(&phase)?;
        for k in spread(s.len(), count) {
            let name = time_file_name(s.times[k]);
            write_field(&profiles.join(&name), &s.v_hat[k])?;
            fs::write(phase.join(&name), phase_to_csv(&s.v_hat[k], &s.accumulated_phase[k]))?;
        }
    }
    let json = serde_json::to_string_pretty(summary).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(dir.join("summary.json"), json)?;
    Ok(())
}

fn summarize(id: &str, config: &RunConfig, a: &Analysis, strict_fp: bool) -> Summary {
    let expectations: Vec<Outcome> = config.expect.iter().map(|e| evaluate(e, a)).collect();
    let completed = a.failure.is_none();
    Summary {
        run_id: id.to_string(),
        name: config.name.clone(),
        config_hash: config.hash(),
        strict_fp,
        completed,
        failure: a.failure.as_ref().map(|f| f.error.to_string()),
        failure_time: a.failure.as_ref().map(|f| f.t).filter(|t| t.is_finite()),
        steps: a.trajectory.steps,
        samples: a.series.as_ref().map_or(0, |s| s.len()),
        mass_drift: a.trajectory.mass_drift,
        pseudo_energy_drift: a.pseudo_energy_drift,
        decay: a.decay,
        cauchy_l2: a.cauchy_l2.as_ref().map(CauchySummary::from),
        cauchy_linf: a.cauchy_linf.as_ref().map(CauchySummary::from),
        envelope: a.envelope.clone(),
        split: a.split.clone(),
        self_convergence: a.self_convergence.clone(),
        passed: completed && expectations.iter().all(|o| o.pass),
        expectations,
    }
}

/// Validates, runs and persists under `<root>/runs/<run-id>/`.
///
/// An invalid configuration is returned as an error before any directory is
/// created. A numerical failure still writes the partial record.
pub fn execute(config: &RunConfig, root: &Path, strict_fp: bool) -> Result<RunRecord> {
    config.resolve()?;
    crate::fft::set_strict_fp(strict_fp);
    let analysis = analyze(config)?;
    let runs = runs_dir(root);
    fs::create_dir_all(&runs)?;
    let id = run_id(config, &runs);
    let dir = runs.join(&id);
    fs::create_dir_all(&dir)?;
    let summary = summarize(&id, config, &analysis, strict_fp);
    persist(&dir, config, &analysis, &summary)?;
    Ok(RunRecord { id, dir, summary })
}

/// Parsed `summary.json`. Non-finite numbers are stored as `null`, so the
/// file is read back as a generic JSON value.
pub fn load_summary(dir: &Path) -> Result<serde_json::Value> {
    let path = dir.join("summary.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Resolves a run id (or a path to a run directory) under `root`.
pub fn locate(root: &Path, id: &str) -> Result<PathBuf> {
    let direct = Path::new(id);
    if direct.join("summary.json").is_file() {
        return Ok(direct.to_path_buf());
    }
    let dir = runs_dir(root).join(id);
    if dir.join("summary.json").is_file() {
        return Ok(dir);
    }
    Err(Error::Io(format!("no run '{id}' under {}", runs_dir(root).display())))
}
