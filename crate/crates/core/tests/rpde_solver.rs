use blowup_core::fbm::{sample_path, FbmPath, Hurst, SamplingMethod, TimeGrid};
use blowup_core::rpde::{
    comparison_probe, mass_functional, solve, to_original, InitialDatum, ModelParams, SolverControls, Verdict,
};
use blowup_core::spectral::{build_basis, DomainSpec, SpectralBasis};
use blowup_core::Error;
use proptest::prelude::*;
use std::f64::consts::PI;

fn decay_params() -> ModelParams {
    ModelParams {
        gamma: 0.0,
        k: 1.0,
        delta: 0.0,
        eta: 0.0,
        p: 2.0,
        q: 2.0,
        m: 0.0,
        n: 2.0,
        hurst: Hurst::new(0.75).unwrap(),
    }
}

fn blowup_params() -> ModelParams {
    ModelParams {
        k: 1e-6,
        ..decay_params()
    }
}

fn controls(horizon: f64) -> SolverControls {
    SolverControls {
        horizon,
        ..SolverControls::default()
    }
}

fn zero_path(horizon: f64, n: usize) -> FbmPath {
    FbmPath::zeros(Hurst::new(0.75).unwrap(), TimeGrid::new(horizon, n).unwrap())
}

fn basis(n: usize) -> SpectralBasis {
    build_basis(DomainSpec::interval(1.0, n), 10).unwrap()
}

#[test]
fn transform_examples() {
    let b = basis(64);
    assert_eq!(to_original(b.phi(), 0.0, 3.7), b.phi().to_vec());
    let u = to_original(b.phi(), 2.0, 1.0);
    for (x, p) in u.iter().zip(b.phi()) {
        assert!((x - 2f64.exp() * p).abs() <= 1e-15 * x.abs());
    }
    let back = to_original(&to_original(b.phi(), 0.7, -1.3), 0.7, 1.3);
    for (x, p) in back.iter().zip(b.phi()) {
        assert!((x - p).abs() <= 1e-14 * p.abs().max(1e-300));
    }
}

#[test]
fn mass_examples() {
    let fine = basis(800);
    let coarse = basis(400);
    let exact = PI * PI / 8.0;
    let e_fine = (mass_functional(&fine, fine.phi()) - exact).abs();
    let e_coarse = (mass_functional(&coarse, coarse.phi()) - exact).abs();
    assert!(e_fine < 1e-5 && e_fine < e_coarse);
    assert_eq!(mass_functional(&fine, &vec![0.0; fine.domain().n_nodes()]), 0.0);
    let scaled: Vec<f64> = fine.phi().iter().map(|p| 3.0 * p).collect();
    assert!((mass_functional(&fine, &scaled) - 3.0 * mass_functional(&fine, fine.phi())).abs() < 1e-12);
}

#[test]
fn deterministic_decay_regime() {
    let b = basis(64);
    let ctl = SolverControls {
        output_dt: Some(0.01),
        ..controls(2.0)
    };
    let tr = solve(
        &decay_params(),
        &b,
        &InitialDatum::PhiMultiple(0.01),
        &zero_path(2.0, 200),
        &ctl,
    )
    .unwrap();
    assert_eq!(tr.verdict, Verdict::GlobalUntilHorizon);
    // Past the initial transient the sup-norm decays monotonically.
    let start = tr.times.iter().position(|&t| t >= 0.1).unwrap();
    assert!(tr.sup_norm[start..].windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn zero_datum_rejected() {
    let b = basis(64);
    let zero = InitialDatum::Nodes(vec![0.0; b.domain().n_nodes()]);
    assert!(matches!(
        solve(&decay_params(), &b, &zero, &zero_path(1.0, 100), &controls(1.0)),
        Err(Error::InvalidParameter { .. })
    ));
}

/// Scalar comparison blow-up time for J' = −λ₁J + C J² with C = (∫φ²)^{-1}.
fn scalar_blowup_time(b: &SpectralBasis, j0: f64) -> f64 {
    let c = 1.0 / b.phi_power_integral(2.0);
    let lam = b.lambda1();
    -(1.0 - lam / (c * j0)).ln() / lam
}

#[test]
fn large_datum_blows_up_before_scalar_bound() {
    let b = basis(128);
    let datum = InitialDatum::PhiMultiple(50.0);
    let j0 = mass_functional(&b, &datum.materialize(&b).unwrap());
    let t_ode = scalar_blowup_time(&b, j0);
    let tr = solve(&blowup_params(), &b, &datum, &zero_path(1.0, 10_000), &controls(1.0)).unwrap();
    let tau = tr.tau_num().expect("blow-up expected");
    assert!(tau.is_finite() && tau <= t_ode * 1.01, "{tau} vs {t_ode}");
}

#[test]
fn barrier_holds_under_admissible_datum() {
    // η = 0, |D| = 1: with q > p the source dominates absorption for large b.
    let b = basis(64);
    let params = ModelParams {
        k: 0.1,
        p: 1.5,
        q: 2.0,
        ..decay_params()
    };
    let bb = 20.0;
    let ctl = SolverControls {
        output_dt: Some(1e-3),
        record_states: true,
        ..controls(0.02)
    };
    let tr = solve(&params, &b, &InitialDatum::PhiMultiple(bb), &zero_path(0.02, 20), &ctl).unwrap();
    let states = tr.states.as_ref().unwrap();
    for s in states {
        let gap = s
            .iter()
            .zip(b.phi())
            .map(|(v, p)| v - bb * p)
            .fold(f64::INFINITY, f64::min);
        assert!(gap >= -1e-8, "{gap}");
    }
}

#[test]
fn comparison_probe_examples() {
    let b = basis(64);
    let ctl = SolverControls {
        output_dt: Some(0.01),
        record_states: true,
        ..controls(0.5)
    };
    let path = zero_path(0.5, 50);
    let p = ModelParams {
        delta: 1.0,
        ..decay_params()
    };
    let lo = solve(&p, &b, &InitialDatum::PhiMultiple(0.5), &path, &ctl).unwrap();
    let hi = solve(&p, &b, &InitialDatum::PhiMultiple(1.0), &path, &ctl).unwrap();
    assert!(comparison_probe(&lo, &hi).unwrap().holds);
    let again = solve(&p, &b, &InitialDatum::PhiMultiple(1.0), &path, &ctl).unwrap();
    assert_eq!(again.mass, hi.mass);
    assert_eq!(again.states, hi.states);
    // Halved Δx preserves the ordering.
    let fine = basis(128);
    let lo = solve(&p, &fine, &InitialDatum::PhiMultiple(0.5), &path, &ctl).unwrap();
    let hi = solve(&p, &fine, &InitialDatum::PhiMultiple(1.0), &path, &ctl).unwrap();
    assert!(comparison_probe(&lo, &hi).unwrap().holds);
}

#[test]
fn blowup_time_grid_convergence() {
    let datum = InitialDatum::PhiMultiple(50.0);
    let path = zero_path(1.0, 10_000);
    let tau = |n: usize, safety: f64| {
        let ctl = SolverControls {
            safety,
            ..controls(1.0)
        };
        solve(&blowup_params(), &basis(n), &datum, &path, &ctl)
            .unwrap()
            .tau_num()
            .unwrap()
    };
    let base = tau(64, 0.02);
    let dx = tau(128, 0.02);
    let dt = tau(64, 0.01);
    assert!((dx - base).abs() < 0.05 * base, "{base} {dx}");
    assert!((dt - base).abs() < 0.05 * base, "{base} {dt}");
}

#[test]
fn blowup_threshold_sensitivity() {
    let b = basis(64);
    let datum = InitialDatum::PhiMultiple(50.0);
    let path = zero_path(1.0, 10_000);
    let taus: Vec<f64> = [1e6, 1e8, 1e10]
        .iter()
        .map(|&v_max| {
            let ctl = SolverControls { v_max, ..controls(1.0) };
            solve(&blowup_params(), &b, &datum, &path, &ctl)
                .unwrap()
                .tau_num()
                .unwrap()
        })
        .collect();
    let spread = (taus[2] - taus[0]).abs() / taus[1];
    assert!(spread < 0.02, "{taus:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn solutions_stay_nonnegative(seed in any::<u64>(), bb in 0.1f64..3.0, eta in 0.0f64..1.0) {
        let b = basis(32);
        let params = ModelParams { eta, delta: 1.0, k: 0.5, p: 1.5, ..decay_params() };
        let path = sample_path(params.hurst, TimeGrid::new(0.5, 500).unwrap(), seed, SamplingMethod::CirculantEmbedding).unwrap();
        let ctl = SolverControls { record_states: true, ..controls(0.5) };
        let tr = solve(&params, &b, &InitialDatum::PhiMultiple(bb), &path, &ctl).unwrap();
        prop_assert!(tr.min_undershoot >= -1e-12);
        for s in tr.states.as_ref().unwrap() {
            prop_assert!(s.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn original_sup_matches_reconstruction(seed in any::<u64>(), eta in 0.1f64..1.0) {
        let b = basis(32);
        let params = ModelParams { eta, ..decay_params() };
        let path = sample_path(params.hurst, TimeGrid::new(0.3, 300).unwrap(), seed, SamplingMethod::CirculantEmbedding).unwrap();
        let ctl = SolverControls { record_states: true, ..controls(0.3) };
        let tr = solve(&params, &b, &InitialDatum::PhiMultiple(1.0), &path, &ctl).unwrap();
        let sups = tr.original_sup_norm();
        for (i, s) in tr.states.as_ref().unwrap().iter().enumerate() {
            let u = to_original(s, eta, path.value_at(tr.times[i]));
            let direct = u.iter().cloned().fold(0.0, f64::max);
            prop_assert!((direct - sups[i]).abs() <= 1e-6 * direct.max(1e-300));
        }
    }
}
