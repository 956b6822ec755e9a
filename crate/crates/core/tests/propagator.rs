mod common;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use common::{presets, random_field, rel_l2};
use hillnls::classical::{solve_fundamental, ClassicalSolution};
use hillnls::compare::{canonicalize, compare_fields};
use hillnls::error::Error;
use hillnls::fft::{fourier, inverse_fourier};
use hillnls::field::{Grid, Representation, WaveField};
use hillnls::propagator::*;
use hillnls::sigma::SigmaModel;
use num_complex::Complex64;
use proptest::prelude::*;

fn grid() -> Grid {
    Grid::new(1, 4096, 60.0).unwrap()
}

fn solve(model: &SigmaModel) -> ClassicalSolution {
    solve_fundamental(model, 20.0, 1e-12).unwrap()
}

fn free_gaussian(grid: Grid, t: f64) -> WaveField {
    // (1+it)^{-1/2} e^{-x²/(2(1+it))}
    let z = Complex64::new(1.0, t);
    WaveField::from_fn(grid, |x| z.powf(-0.5) * (-(x[0] * x[0]) / (2.0 * z)).exp())
}

fn distance_after_canonical(sol: &ClassicalSolution, t: f64, a: &WaveField, b: &WaveField) -> f64 {
    let beta = reference_chirp(sol, t).unwrap();
    compare_fields(a, b, beta).unwrap().relative
}

#[test]
fn fourier_examples() {
    let g = Grid::new(1, 1024, 20.0).unwrap();
    let gauss = WaveField::gaussian(g, 1.0, 0.0, 0.0);
    let fh = fourier(&gauss);
    let xi = fh.coordinates();
    for (k, z) in fh.samples().iter().enumerate() {
        assert!((z - Complex64::new((-xi[k] * xi[k] / 2.0).exp(), 0.0)).norm() < 1e-13);
    }

    let (w, a) = (0.2, 1.5);
    let narrow = WaveField::gaussian(g, w, a, 0.0);
    let nh = fourier(&narrow);
    let xi = nh.coordinates();
    for (k, z) in nh.samples().iter().enumerate() {
        let exact = Complex64::from_polar(w * (-w * w * xi[k] * xi[k] / 2.0).exp(), -a * xi[k]);
        assert!((z - exact).norm() < 1e-12);
    }
    assert!((nh.l2_norm() - narrow.l2_norm()).abs() < 1e-12);

    let zero = fourier(&WaveField::zeros(g));
    assert_eq!(zero.linf_norm(), 0.0);
    assert_eq!(zero.representation(), Representation::Frequency);
}

#[test]
fn fourier_in_two_dimensions() {
    let g = Grid::new(2, 64, 8.0).unwrap();
    let f = WaveField::gaussian(g, 1.0, 0.0, 0.0);
    let fh = fourier(&f);
    let xi = fh.coordinates();
    for (idx, z) in fh.samples().iter().enumerate() {
        let ij = g.unflatten(idx);
        let r2 = xi[ij[0]].powi(2) + xi[ij[1]].powi(2);
        assert!((z.re - (-r2 / 2.0).exp()).abs() < 1e-12 && z.im.abs() < 1e-12);
    }
    assert!(inverse_fourier(&fh).distance(&f).unwrap() < 1e-12);
}

#[test]
fn modulation_examples() {
    let g = grid();
    let f = WaveField::gaussian(g, 1.0, 0.3, 0.2);
    assert!(modulation(&f, 2e12).unwrap().distance(&f).unwrap() < 1e-10);
    let m = modulation(&f, 1.0).unwrap();
    let peak = f.linf_norm();
    for (a, b) in f.samples().iter().zip(m.samples()) {
        assert!((a.norm() - b.norm()).abs() <= 4.0 * f64::EPSILON * peak);
    }
    let back = modulation(&modulation(&f, 0.7).unwrap(), -0.7).unwrap();
    assert!(back.distance(&f).unwrap() < 1e-14);
    assert!(modulation(&f, 0.0).is_err());
}

#[test]
fn dilation_examples() {
    for dim in 1..=3 {
        let g = Grid::new(dim, 16, 4.0).unwrap();
        let f = WaveField::gaussian(g, 1.0, 0.0, 0.0);
        let d = dilation(&f, 1.0).unwrap();
        let expected = Complex64::new(0.0, 1.0).powf(-(dim as f64) / 2.0);
        assert_eq!(d.scale(), 1.0);
        assert!(d.distance(&f.scaled(expected)).unwrap() < 1e-14);

        let dd = dilation(&dilation(&f, 2.0).unwrap(), 0.5).unwrap();
        assert_eq!(dd.scale(), 1.0);
        let i_pow = Complex64::new(0.0, 1.0).powi(-(dim as i32));
        assert!(dd.distance(&f.scaled(i_pow)).unwrap() < 1e-13);
    }
    let f = random_field(grid(), 3);
    for tau in [2.5, -0.3, 1e-3] {
        let d = dilation(&f, tau).unwrap();
        assert!((d.l2_norm() / f.l2_norm() - 1.0).abs() < 1e-14);
    }
    assert!(dilation(&f, 0.0).is_err());
}

#[test]
fn parity_examples() {
    let g2 = Grid::new(2, 32, 6.0).unwrap();
    let even = WaveField::gaussian(g2, 1.0, 0.0, 0.0);
    assert!(parity_shift(&even, 1).distance(&even.scaled(Complex64::new(-1.0, 0.0))).unwrap() < 1e-14);

    let g = grid();
    let any = random_field(g, 11);
    assert!(parity_shift(&any, 4).distance(&any).unwrap() < 1e-13);

    let odd = WaveField::from_fn(g, |x| Complex64::new(x[0] * (-x[0] * x[0]).exp(), 0.0));
    let s = parity_shift(&odd, 1);
    let expected = odd.scaled(-Complex64::from_polar(1.0, -FRAC_PI_2));
    assert!(s.distance(&expected).unwrap() < 1e-14);
}

#[test]
fn korotyaev_examples() {
    let g = grid();
    let f = WaveField::gaussian(g, 1.0, 0.0, 0.0);

    let sol0 = solve(&SigmaModel::Zero);
    let id = apply_korotyaev(&sol0, 0.0, &f).unwrap();
    assert!(id.distance(&f).unwrap() < 1e-14);

    let u = apply_korotyaev(&sol0, 1.0, &f).unwrap();
    assert!(distance_after_canonical(&sol0, 1.0, &u, &free_gaussian(g, 1.0)) < 1e-8);
    assert!((u.l2_norm() / f.l2_norm() - 1.0).abs() < 1e-10);

    let solm = solve(&SigmaModel::Constant(-1.0));
    let u = apply_korotyaev(&solm, 1.0, &f).unwrap();
    let exact = gaussian_exact(&solm, 1.0, 1.0, g).unwrap();
    assert!(distance_after_canonical(&solm, 1.0, &u, &exact) < 1e-6);
}

#[test]
fn quadratic_phase_examples() {
    let g = grid();
    let sol0 = solve(&SigmaModel::Zero);
    let f = random_field(g, 5);
    let qp = apply_quadratic_phase(&sol0, 2.0, &f).unwrap();
    let pure = hillnls::fft::free_flow(&f, 1.0).0;
    assert!(rel_l2(&qp, &pure) < 1e-12);

    for model in presets() {
        let sol = solve(&model);
        for seed in 0..3 {
            let f = random_field(g, 100 + seed);
            let a = apply_quadratic_phase(&sol, 1.0, &f).unwrap();
            let b = apply_korotyaev(&sol, 1.0, &f).unwrap();
            assert!(distance_after_canonical(&sol, 1.0, &a, &b) < 1e-9, "{model}");
        }
    }

    let solp = solve(&SigmaModel::Constant(1.0));
    let f = WaveField::gaussian(g, 1.3, 0.0, 0.0);
    let u = apply_quadratic_phase(&solp, FRAC_PI_4, &f).unwrap();
    let exact = gaussian_exact(&solp, FRAC_PI_4, 1.3, g).unwrap();
    assert!(distance_after_canonical(&solp, FRAC_PI_4, &u, &exact) < 1e-6);

    assert!(matches!(
        apply_quadratic_phase(&solp, 0.0, &f),
        Err(Error::FactorizationUndefined { .. })
    ));
}

#[test]
fn mdfm_examples() {
    let g = grid();
    for model in presets() {
        let sol = solve(&model);
        let f = random_field(g, 7);
        let a = apply_mdfm(&sol, 1.0, &f).unwrap();
        let b = apply_quadratic_phase(&sol, 1.0, &f).unwrap();
        assert!(distance_after_canonical(&sol, 1.0, &a, &b) < 1e-9, "{model}");
        let c = apply_mdfm(&sol, 3.0, &f).unwrap();
        assert!((c.l2_norm() / f.l2_norm() - 1.0).abs() < 1e-10);
    }
    let sol0 = solve(&SigmaModel::Zero);
    let u = apply_mdfm(&sol0, 1.0, &WaveField::gaussian(g, 1.0, 0.0, 0.0)).unwrap();
    assert!(distance_after_canonical(&sol0, 1.0, &u, &free_gaussian(g, 1.0)) < 1e-8);
}

#[test]
fn mdmdfm_examples() {
    let g = grid();
    let f = random_field(g, 9);
    let sol = solve(&SigmaModel::Constant(-1.0));
    assert!(apply_mdmdfm(&sol, 0.0, &f).unwrap().distance(&f).unwrap() < 1e-14);

    let solp = solve(&SigmaModel::Constant(1.0));
    let ground = WaveField::gaussian(g, 1.0, 0.0, 0.0);
    for t in [0.4, 2.0, 5.5, 11.0] {
        let u = apply_mdmdfm(&solp, t, &ground).unwrap();
        let u = canonicalize(&u, reference_chirp(&solp, t).unwrap()).unwrap();
        let expected = ground.scaled(Complex64::from_polar(1.0, -t / 2.0));
        assert!(rel_l2(&u, &expected) < 1e-7, "t={t}");
    }

    for model in presets() {
        let sol = solve(&model);
        let a = apply_mdmdfm(&sol, 2.0, &f).unwrap();
        let b = apply_mdfm(&sol, 2.0, &f).unwrap();
        assert!(distance_after_canonical(&sol, 2.0, &a, &b) < 1e-6, "{model}");
    }
}

#[test]
fn propagate_dispatch() {
    let g = grid();
    let f = random_field(g, 13);
    let sol = solve(&SigmaModel::Constant(1.0));
    let opts = PropagatorOptions::default();
    let p = propagate_with(&sol, 0.0, &f, FactorizationKind::Auto, &opts).unwrap();
    assert!(p.field.distance(&f).unwrap() == 0.0);

    let p = propagate_with(&sol, 1.0, &f, FactorizationKind::Auto, &opts).unwrap();
    assert_eq!(p.kind, FactorizationKind::Mdfm);

    // ζ₂ = sin t vanishes at π; the selection rule falls to Korotyaev.
    let p = propagate_with(&sol, PI, &f, FactorizationKind::Auto, &opts).unwrap();
    assert_eq!(p.kind, FactorizationKind::Korotyaev);
    assert!(matches!(
        propagate(&sol, PI, &f, FactorizationKind::Mdfm),
        Err(Error::FactorizationUndefined { .. })
    ));
    assert!(propagate(&sol, 0.0, &f, FactorizationKind::Mdfm).is_err());

    // Large free-flow parameters make the quadratic-phase chain alias; Auto
    // falls through while the explicit request reports the guard.
    let solm = solve(&SigmaModel::Constant(-1.0));
    assert!(matches!(
        propagate(&solm, 5.0, &f, FactorizationKind::QuadraticPhase),
        Err(Error::Aliasing { .. })
    ));
}

#[test]
fn auto_at_zeta2_zero_matches_crank_nicolson() {
    let g = Grid::new(1, 2048, 40.0).unwrap();
    let model = SigmaModel::Constant(1.0);
    let sol = solve(&model);
    let f = WaveField::gaussian(g, 1.4, 0.7, -0.4);
    let cn = crank_nicolson_linear(&model, 0.0, PI, 1e-3, &f).unwrap();
    for kind in [FactorizationKind::Auto, FactorizationKind::Mdmdfm] {
        let u = propagate(&sol, PI, &f, kind).unwrap();
        let u = canonicalize(&u, reference_chirp(&sol, PI).unwrap()).unwrap();
        assert!(rel_l2(&u, &cn) < 1e-4, "{kind:?}: {}", rel_l2(&u, &cn));
    }
}

#[test]
fn pullback_examples() {
    let g = grid();
    let f = random_field(g, 17);
    let sol = solve(&SigmaModel::Constant(-1.0));
    assert_eq!(pullback(&sol, 0.0, &f).unwrap(), f);

    for model in presets() {
        let sol = solve(&model);
        let u = propagate(&sol, 2.0, &f, FactorizationKind::Auto).unwrap();
        let back = pullback_with(&sol, 2.0, &u, FactorizationKind::Auto, &PropagatorOptions::default()).unwrap();
        assert!(back.field.same_layout(&f));
        assert!(rel_l2(&back.field, &f) < 1e-9, "{model}");
    }

    let sol0 = solve(&SigmaModel::Zero);
    let gauss = WaveField::gaussian(g, 1.0, 0.0, 0.0);
    let v = pullback(&sol0, 1.5, &gauss).unwrap();
    // e^{+itp²/2} on the Gaussian: (1−it)^{-1/2} e^{−x²/(2(1−it))}
    let z = Complex64::new(1.0, -1.5);
    let exact = WaveField::from_fn(g, |x| z.powf(-0.5) * (-(x[0] * x[0]) / (2.0 * z)).exp());
    let beta = -solve(&SigmaModel::Zero).state(-1.5).unwrap().a2() / 2.0;
    assert!(compare_fields(&v, &exact, beta).unwrap().relative < 1e-9);
}

#[test]
fn crank_nicolson_examples() {
    let g = Grid::new(1, 1024, 30.0).unwrap();
    let f = WaveField::gaussian(g, 1.0, 0.0, 0.0);
    assert_eq!(crank_nicolson_linear(&SigmaModel::Zero, 0.3, 0.3, 1e-3, &f).unwrap(), f);

    let exact = free_gaussian(g, 1.0);
    let e1 = rel_l2(&crank_nicolson_linear(&SigmaModel::Zero, 0.0, 1.0, 2e-2, &f).unwrap(), &exact);
    let e2 = rel_l2(&crank_nicolson_linear(&SigmaModel::Zero, 0.0, 1.0, 1e-2, &f).unwrap(), &exact);
    let ratio = e1 / e2;
    assert!((ratio - 4.0).abs() < 0.8, "ratio {ratio}");

    let model = SigmaModel::Constant(-1.0);
    let sol = solve(&model);
    let g = Grid::new(1, 2048, 40.0).unwrap();
    let f = random_field(g, 19);
    let u = propagate(&sol, 1.0, &f, FactorizationKind::Auto).unwrap();
    let u = canonicalize(&u, reference_chirp(&sol, 1.0).unwrap()).unwrap();
    let d1 = rel_l2(&crank_nicolson_linear(&model, 0.0, 1.0, 2e-3, &f).unwrap(), &u);
    let d2 = rel_l2(&crank_nicolson_linear(&model, 0.0, 1.0, 1e-3, &f).unwrap(), &u);
    assert!((d1 / d2 - 4.0).abs() < 0.8, "ratio {}", d1 / d2);
}

#[test]
fn crank_nicolson_reports_inner_failure() {
    let g = Grid::new(1, 256, 60.0).unwrap();
    let f = WaveField::gaussian(g, 1.0, 0.0, 0.0);
    let r = crank_nicolson_linear(&SigmaModel::Constant(1.0), 0.0, 1.0, 0.5, &f);
    assert!(matches!(r, Err(Error::InnerSolve { .. })));
}

#[test]
fn gaussian_exact_examples() {
    let g = grid();
    let sol0 = solve(&SigmaModel::Zero);
    let at0 = gaussian_exact(&sol0, 0.0, 1.7, g).unwrap();
    assert!(rel_l2(&at0, &WaveField::gaussian(g, 1.7, 0.0, 0.0)) < 1e-15);
    assert!(rel_l2(&gaussian_exact(&sol0, 1.0, 1.0, g).unwrap(), &free_gaussian(g, 1.0)) < 1e-14);

    let solp = solve(&SigmaModel::Constant(1.0));
    let base = WaveField::gaussian(g, 1.0, 0.0, 0.0);
    for t in [0.7, 3.0, 9.0] {
        let u = gaussian_exact(&solp, t, 1.0, g).unwrap();
        for (a, b) in u.samples().iter().zip(base.samples()) {
            assert!((a.norm() - b.norm()).abs() < 1e-9);
        }
    }
}

#[test]
fn gaussian_exact_agrees_with_crank_nicolson() {
    let g = Grid::new(1, 2048, 40.0).unwrap();
    for model in presets() {
        let sol = solve(&model);
        let exact = gaussian_exact(&sol, 2.0, 0.8, g).unwrap();
        let cn = crank_nicolson_linear(&model, 0.0, 2.0, 1e-3, &WaveField::gaussian(g, 0.8, 0.0, 0.0)).unwrap();
        assert!(rel_l2(&cn, &exact) < 1e-5, "{model}: {}", rel_l2(&cn, &exact));
    }
}

#[test]
fn group_property() {
    let g = grid();
    let f = random_field(g, 23);
    for model in presets() {
        let sol = solve(&model);
        let (t1, t2) = (0.8, 1.9);
        let u1 = propagate(&sol, t1, &f, FactorizationKind::Auto).unwrap();
        let v = pullback(&sol, t1, &u1).unwrap();
        let u2 = propagate(&sol, t2, &v, FactorizationKind::Auto).unwrap();
        let direct = propagate(&sol, t2, &f, FactorizationKind::Auto).unwrap();
        assert!(distance_after_canonical(&sol, t2, &u2, &direct) < 1e-7, "{model}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn factorizations_are_unitary_and_invertible(seed in 0u64..10_000, preset in 0usize..4, t in -6.0f64..6.0) {
        let g = Grid::new(1, 2048, 60.0).unwrap();
        let f = random_field(g, seed);
        let sol = solve(&presets()[preset]);
        let opts = PropagatorOptions::default();
        for kind in FactorizationKind::EXPLICIT {
            let Ok(p) = propagate_with(&sol, t, &f, kind, &opts) else { continue };
            prop_assert!((p.field.l2_norm() / f.l2_norm() - 1.0).abs() < 1e-10);
            let back = pullback_with(&sol, t, &p.field, kind, &opts).unwrap();
            prop_assert!(rel_l2(&back.field, &f) < 1e-9);
        }
    }

    #[test]
    fn gauge_and_linearity(seed in 0u64..10_000, phase in 0.0f64..std::f64::consts::TAU, t in 0.1f64..4.0) {
        let g = Grid::new(1, 2048, 60.0).unwrap();
        let f = random_field(g, seed);
        let h = random_field(g, seed + 1);
        let sol = solve(&SigmaModel::Constant(1.0));
        let c = Complex64::from_polar(1.0, phase);
        for kind in FactorizationKind::EXPLICIT {
            let Ok(uf) = propagate(&sol, t, &f, kind) else { continue };
            let uh = propagate(&sol, t, &h, kind).unwrap();
            let mut sum = f.clone();
            for (a, b) in sum.samples_mut().iter_mut().zip(h.samples()) {
                *a = c * *a + b;
            }
            let us = propagate(&sol, t, &sum, kind).unwrap();
            let mut expected = uf.scaled(c);
            for (a, b) in expected.samples_mut().iter_mut().zip(uh.samples()) {
                *a += b;
            }
            prop_assert!(rel_l2(&us, &expected) < 1e-12);
        }
    }
}
