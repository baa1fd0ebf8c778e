use blowup_core::fbm::{sample_ensemble, FbmPath, Hurst, SamplingMethod, TimeGrid};
use blowup_core::probability::{
    bessel_series_case2, density_upper_bound, exponential_functional_law_check, gamma_law_case1, judge, ks_self_test,
    malliavin_assemble, malliavin_lower_bound, mc_blowup_probability, wilson_interval, BesselSeriesInputs, BoundSide,
    BoundVerdict, DensityBoundInputs, GammaLawInputs, MalliavinInputs, TailAssembly, Z_95,
};
use blowup_core::rpde::{solve, InitialDatum, ModelParams, SolverControls, Verdict};
use blowup_core::special::{bessel_j_zeros, gamma_p, mcmahon_zero};
use blowup_core::spectral::{build_basis, DomainSpec};
use blowup_core::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma};

/// J₀ by its ascending power series, independent of the library routine.
fn j0_series(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= -(x * x / 4.0) / (k as f64 * k as f64);
        sum += term;
        if term.abs() < 1e-18 {
            break;
        }
    }
    sum
}

#[test]
fn first_zero_of_order_zero() {
    let (mut lo, mut hi) = (2.0, 3.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if j0_series(lo) * j0_series(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let z = bessel_j_zeros(0.0, 1).unwrap()[0];
    assert!((z - 0.5 * (lo + hi)).abs() < 1e-6);
    assert!((z - 2.404826).abs() < 1e-6);
}

#[test]
fn zero_counts_follow_mcmahon() {
    for &nu in &[-0.5, 0.0, 0.7, 2.3, 7.0] {
        let zeros = bessel_j_zeros(nu, 50).unwrap();
        assert!(zeros.windows(2).all(|w| w[1] > w[0]));
        let top = zeros[49];
        for i in 1..=200 {
            let x = top * i as f64 / 200.0;
            let actual = zeros.iter().filter(|&&z| z < x).count() as i64;
            let predicted = (1..=60).filter(|&s| mcmahon_zero(nu, s) < x).count() as i64;
            assert!((actual - predicted).abs() <= 1, "ν={nu} x={x}: {actual} vs {predicted}");
        }
    }
}

#[test]
fn gamma_cdf_matches_sampling() {
    let theta = 2.7;
    let law = Gamma::new(theta, 1.0).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(99);
    let n = 1_000_000;
    let samples: Vec<f64> = (0..n).map(|_| law.sample(&mut rng)).collect();
    for i in 1..=20 {
        let x = 0.4 * i as f64;
        let p = gamma_p(theta, x).unwrap();
        let emp = samples.iter().filter(|&&s| s <= x).count() as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt().max(1e-9);
        assert!((emp - p).abs() < 3.0 * se + 1e-12, "x={x}: {emp} vs {p}");
    }
}

#[test]
fn gamma_law_limits() {
    let at = |threshold| gamma_law_case1(GammaLawInputs { theta1: 1.7, threshold }).unwrap();
    assert!(at(1e-12) < 1e-15);
    assert!(at(1e3) > 1.0 - 1e-14);
    assert!(matches!(
        gamma_law_case1(GammaLawInputs {
            theta1: -1.0,
            threshold: 1.0
        }),
        Err(Error::InvalidParameter { .. })
    ));
}

#[test]
fn bessel_series_limits_and_domain() {
    let inputs = |order: f64, a1| BesselSeriesInputs {
        order,
        a1,
        prefactor: 4.0 * (order + 1.0),
        decay: 0.125,
    };
    assert!(bessel_series_case2(&inputs(1.0, 1e4)).unwrap().value < 1e-100);
    assert!(bessel_series_case2(&inputs(-1.0, 1.0)).is_err());
    assert!(bessel_series_case2(&inputs(0.0, -1.0)).is_err());
}

#[test]
fn density_bound_limits() {
    let at = |n_tilde1| {
        density_upper_bound(DensityBoundInputs {
            n_tilde1,
            shape: 1.3,
            scale: 0.8,
        })
        .unwrap()
        .value
    };
    assert!(at(1e-9) > 1.0 - 1e-12);
    assert!(at(1e9) < 1e-9);
    assert!(density_upper_bound(DensityBoundInputs {
        n_tilde1: 1.0,
        shape: 0.0,
        scale: 1.0
    })
    .is_err());
}

fn malliavin_paths() -> Vec<FbmPath> {
    sample_ensemble(
        Hurst::new(0.75).unwrap(),
        TimeGrid::new(20.0, 4000).unwrap(),
        4,
        64,
        SamplingMethod::CirculantEmbedding,
    )
    .unwrap()
}

fn malliavin_inputs(gamma: f64) -> MalliavinInputs {
    MalliavinInputs {
        lambda1: 1.0,
        gamma,
        eta: 0.5,
        mu: 2.0,
        n_tilde: 0.3,
        j0: 1.0,
    }
}

#[test]
fn malliavin_examples() {
    let paths = malliavin_paths();
    let sure = malliavin_lower_bound(&paths, malliavin_inputs(2.0), 1.0).unwrap();
    assert!(sure.almost_sure && sure.printed == 1.0);
    assert_eq!(malliavin_assemble(1.0, 0.7, 0.5, TailAssembly::Multiply), 0.0);
    let r = malliavin_lower_bound(&paths, malliavin_inputs(0.0), 1.0).unwrap();
    assert!(!r.almost_sure);
    assert_eq!(r.variants.len(), 8);
    for v in &r.variants {
        assert!((0.0..=1.0).contains(&v.bound));
        assert!(v.n_h.value >= 1.0);
        assert!(v.n_h.tail_in_mean < 1e-6);
    }
    assert!(matches!(
        malliavin_lower_bound(&paths, malliavin_inputs(0.0), 0.7),
        Err(Error::Config(_))
    ));
}

#[test]
fn monte_carlo_extremes() {
    let basis = build_basis(DomainSpec::interval(1.0, 32), 10).unwrap();
    let params = ModelParams {
        gamma: 0.0,
        k: 1e-6,
        delta: 0.0,
        eta: 0.0,
        p: 2.0,
        q: 2.0,
        m: 0.0,
        n: 2.0,
        hurst: Hurst::new(0.75).unwrap(),
    };
    let path = FbmPath::zeros(params.hurst, TimeGrid::new(0.5, 500).unwrap());
    let ctl = SolverControls {
        horizon: 0.5,
        ..SolverControls::default()
    };
    let blown = solve(&params, &basis, &InitialDatum::PhiMultiple(50.0), &path, &ctl).unwrap();
    let calm = solve(&params, &basis, &InitialDatum::PhiMultiple(0.01), &path, &ctl).unwrap();
    assert!(matches!(blown.verdict, Verdict::BlewUp { .. }));
    assert_eq!(calm.verdict, Verdict::GlobalUntilHorizon);
    let all_blown = mc_blowup_probability(&vec![blown.clone(); 40]).unwrap();
    assert_eq!(all_blown.estimate, 1.0);
    assert_eq!(all_blown.censored, 0);
    assert!(all_blown.ci_low > 0.9 && all_blown.ci_high == 1.0);
    let all_calm = mc_blowup_probability(&vec![calm.clone(); 40]).unwrap();
    assert_eq!(all_calm.estimate, 0.0);
    assert!(all_calm.ci_high < 0.1 && all_calm.censored_fraction == 1.0);
    assert!(matches!(mc_blowup_probability(&[]), Err(Error::EmptyEnsemble)));
    assert!(matches!(
        mc_blowup_probability(&vec![calm; 10]),
        Err(Error::EnsembleTooSmall { .. })
    ));
}

#[test]
fn exponential_functional_moments() {
    for &(alpha, tol) in &[(2.0, 0.05), (3.0, 0.03)] {
        let r = exponential_functional_law_check(alpha, 10_000, 2e-3, 2024).unwrap();
        assert!((r.sample_mean - r.reference_mean).abs() < tol, "{r:?}");
    }
    assert!(matches!(
        exponential_functional_law_check(0.9, 100, 1e-2, 0),
        Err(Error::Refused(_))
    ));
    assert!(ks_self_test(3.0, 10_000, 5).unwrap().passed);
}

#[test]
fn verdicts() {
    let mc = mc_blowup_probability(&[]).err();
    assert!(mc.is_some());
    let est = blowup_core::probability::McEstimate {
        n: 100,
        blown_up: 50,
        censored: 50,
        estimate: 0.5,
        ci_low: 0.4,
        ci_high: 0.6,
        censored_fraction: 0.5,
    };
    assert_eq!(judge(0.3, BoundSide::Lower, &est), BoundVerdict::Consistent);
    assert_eq!(judge(0.7, BoundSide::Lower, &est), BoundVerdict::Violation);
    assert_eq!(judge(0.3, BoundSide::Upper, &est), BoundVerdict::Violation);
    assert_eq!(judge(1.2, BoundSide::Upper, &est), BoundVerdict::OutOfRange);
    assert_eq!(judge(f64::NAN, BoundSide::Upper, &est), BoundVerdict::Undefined);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn malliavin_monotone_in_noise(n_h in 1.0f64..3.0, m_h in 0.01f64..5.0, rho in 0.05f64..3.0, bump in 1.001f64..2.0) {
        for assembly in [TailAssembly::Multiply, TailAssembly::Divide] {
            let a = malliavin_assemble(n_h, m_h, rho, assembly);
            let b = malliavin_assemble(n_h, m_h, rho * bump, assembly);
            prop_assert!(b <= a);
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }

    #[test]
    fn bessel_series_is_a_probability(lam in 0.1f64..30.0, eta in 0.2f64..3.0, q in 1.2f64..3.0, a1 in 0.001f64..5.0) {
        let inputs = BesselSeriesInputs::assemble(lam, 0.0, eta, q, a1);
        prop_assume!(inputs.order > -1.0);
        let r = bessel_series_case2(&inputs).unwrap();
        prop_assert!(r.value >= 0.0 && r.value <= 1.0, "{:?}", r.value);
        prop_assert!(r.truncation_bound <= 1e-10 * r.value.max(1e-300) + 1e-300);
    }

    #[test]
    fn density_tail_matches_quadrature(shape in 0.2f64..6.0, scale in 0.1f64..5.0, n1 in 0.01f64..20.0) {
        let r = density_upper_bound(DensityBoundInputs { n_tilde1: n1, shape, scale }).unwrap();
        prop_assert!((r.value - r.quadrature).abs() < 1e-10);
        prop_assert!((0.0..=1.0).contains(&r.value));
    }

    #[test]
    fn gamma_law_in_unit_interval(theta in 0.05f64..20.0, thr in 0.0f64..50.0) {
        let p = gamma_law_case1(GammaLawInputs { theta1: theta, threshold: thr }).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn wilson_interval_brackets_estimate(n in 1usize..5000, frac in 0.0f64..=1.0) {
        let k = ((n as f64) * frac).round() as usize;
        let (lo, hi) = wilson_interval(k, n, Z_95);
        let p = k as f64 / n as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-15 && p <= hi + 1e-15 && hi <= 1.0);
    }
}
