use hillnls::config::*;
use hillnls::sigma::{Regularization, SigmaModel};

const EXAMPLE: &str = r#"
name = "example"

[sigma]
model = "inverse-square"
k = 0.15
regularization = "lorentzian"

[nonlinearity]
nu = 1.0
rho_l = 2.0

[grid]
points = 512
half_width = 40.0

[initial]
epsilon = 0.05

[time]
t_end = 4.0
dt = 1e-2
samples = 5

[diagnostics]
fit_window = [1.0, 3.0]

[[expect]]
kind = "mass-drift-max"
max = 1e-10

[[expect]]
kind = "cauchy-corrected-max"
norm = "linf"
max = -0.2
"#;

fn example() -> RunConfig {
    RunConfig::from_toml_str(EXAMPLE).unwrap()
}

#[test]
fn parses_sections_and_defaults() {
    let c = example();
    assert_eq!(c.grid.dim, 1);
    assert_eq!(c.nonlinearity.mu, 0.0);
    assert_eq!(c.nonlinearity.rho_s, 3.0);
    assert_eq!(c.time.r0, 1.0);
    assert_eq!(c.time.mode, TimeMode::SplitStep);
    assert_eq!(c.diagnostics.gamma, 1.5);
    assert_eq!(c.expect.len(), 2);
    assert_eq!(
        c.sigma_model().unwrap(),
        SigmaModel::InverseSquare { k: 0.15, regularization: Regularization::Lorentzian }
    );
}

#[test]
fn toml_round_trip_and_hash() {
    let c = example();
    let again = RunConfig::from_toml_str(&c.to_toml_string()).unwrap();
    assert_eq!(again, c);
    assert_eq!(again.hash(), c.hash());
    let changed = c.with_overrides(&["time.dt=5e-3".into()]).unwrap();
    assert_ne!(changed.hash(), c.hash());
}

#[test]
fn unknown_keys_are_rejected() {
    assert!(RunConfig::from_toml_str(&EXAMPLE.replace("half_width", "halfwidth")).is_err());
    assert!(RunConfig::from_toml_str(&format!("{EXAMPLE}\n[extra]\nx = 1\n")).is_err());
    let c = example();
    for bad in ["grid.bogus=1", "nope.dt=1", "time=3", "time.dt", ".dt=1", "time..dt=1"] {
        assert!(c.with_overrides(&[bad.to_string()]).is_err(), "{bad} accepted");
    }
}

#[test]
fn overrides_apply_and_promote_integers() {
    let c = example()
        .with_overrides(&[
            "time.t_end=8".into(),
            "grid.points=1024".into(),
            "sigma.model=constant".into(),
            "sigma.value=-1".into(),
            "sigma.k=0.1".into(),
            "diagnostics.fit_window=[2.0, 6.0]".into(),
        ])
        .unwrap();
    assert_eq!(c.time.t_end, 8.0);
    assert_eq!(c.grid.points, 1024);
    assert_eq!(c.diagnostics.fit_window, [2.0, 6.0]);
    // `k` is meaningless for a constant model.
    assert!(c.sigma_model().is_err());
    let c = c.with_overrides(&["sigma.regularization=\"recessive\"".into()]).unwrap();
    assert!(c.sigma_model().is_err());
}

#[test]
fn sigma_section_checks_required_keys() {
    let mut c = example();
    c.sigma = SigmaSection { model: "constant".into(), value: None, k: None, regularization: None, table: None };
    assert!(c.sigma_model().is_err());
    c.sigma.value = Some(2.0);
    assert_eq!(c.sigma_model().unwrap(), SigmaModel::Constant(2.0));
    c.sigma.model = "zero".into();
    assert!(c.sigma_model().is_err());
    c.sigma.value = None;
    assert_eq!(c.sigma_model().unwrap(), SigmaModel::Zero);
    c.sigma.model = "cosine".into();
    assert!(c.sigma_model().is_err());
}

#[test]
fn table_path_resolves_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("sigma.csv"), "t,sigma\n0,0.5\n10,0.5\n").unwrap();
    let text = EXAMPLE
        .replace("model = \"inverse-square\"", "model = \"table\"\ntable = \"sigma.csv\"")
        .replace("k = 0.15\n", "")
        .replace("regularization = \"lorentzian\"\n", "");
    let path = dir.path().join("run.toml");
    std::fs::write(&path, text).unwrap();
    let c = RunConfig::from_path(&path).unwrap();
    let model = c.sigma_model().unwrap();
    assert_eq!(model.evaluate(3.0).unwrap(), 0.5);
}

#[test]
fn epsilon_sets_weighted_norm_budget() {
    // For A e^{−x²/2}: ‖·‖_{1,0} = ‖·‖_{0,1} = A π^{1/4} √(3/2).
    let c = example();
    let u0 = c.initial_field().unwrap();
    let expected = 0.05 / (2.0 * std::f64::consts::PI.powf(0.25) * 1.5f64.sqrt());
    let peak = u0.linf_norm();
    assert!((peak - expected).abs() < 1e-10 * expected, "{peak} vs {expected}");

    let both = c.with_overrides(&["initial.amplitude=0.3".into()]).unwrap();
    assert!(both.initial_field().is_err());
    let zero = c.with_overrides(&["initial.kind=zero".into(), "initial.epsilon=0.0".into()]).unwrap();
    assert_eq!(zero.initial_field().unwrap().linf_norm(), 0.0);
}

#[test]
fn sample_times_pin_endpoints() {
    let c = example();
    let t = c.sample_times().unwrap();
    assert_eq!(t.len(), 5);
    assert_eq!(t[0], 1.0);
    assert_eq!(t[4], 4.0);
    assert!((t[2] - 2.0).abs() < 1e-12);
    let lin = c.with_overrides(&["time.spacing=linear".into()]).unwrap().sample_times().unwrap();
    assert_eq!(lin, vec![1.0, 1.75, 2.5, 3.25, 4.0]);
    let explicit = c.with_overrides(&["time.times=[0.5, 2.0]".into()]).unwrap().sample_times().unwrap();
    assert_eq!(explicit, vec![0.5, 2.0]);
}

#[test]
fn resolve_validates_combinations() {
    let c = example();
    let r = c.resolve().unwrap();
    assert_eq!(r.evolution.times.len(), 5);
    assert_eq!(r.diagnostics.fit_window, (1.0, 3.0));
    assert_eq!(r.decay_window, (1.0, 3.0));

    let nonlinear_propagator = c.with_overrides(&["time.mode=propagator".into()]).unwrap();
    assert!(nonlinear_propagator.resolve().is_err());
    for bad in ["time.dt=0", "grid.points=100", "diagnostics.alpha=0.9", "diagnostics.gamma=0.4", "time.t_end=0.5"] {
        let cfg = c.with_overrides(&[bad.into()]).unwrap();
        assert!(cfg.resolve().is_err(), "{bad} resolved");
    }
}

#[test]
fn expectation_labels_are_distinct() {
    let all = [
        Expectation::DecaySlopeT { target: -0.5, rel_tol: 0.03 },
        Expectation::DecaySlopeZeta2 { target: -0.5, rel_tol: 0.03 },
        Expectation::CauchyCorrectedMax { norm: NormChoice::L2, max: -0.2 },
        Expectation::CauchyCorrectedMax { norm: NormChoice::Linf, max: -0.2 },
        Expectation::CauchyUncorrectedMax { norm: NormChoice::Linf, max: -0.2 },
        Expectation::CauchyGapMin { norm: NormChoice::Linf, gap: 0.3 },
        Expectation::MassDriftMax { max: 1e-10 },
        Expectation::PseudoEnergyDriftMax { max: 1e-6 },
        Expectation::Envelope { factor: 10.0, tail_from: 20.0, slope_lo: -0.1, slope_hi: 0.02 },
        Expectation::SplitRate { rel_tol: 0.3 },
        Expectation::SelfConvergence { lo: 3.2, hi: 4.8 },
        Expectation::Completes,
    ];
    let mut labels: Vec<String> = all.iter().map(|e| e.label()).collect();
    labels.sort();
    labels.dedup();
    assert_eq!(labels.len(), all.len());
}
