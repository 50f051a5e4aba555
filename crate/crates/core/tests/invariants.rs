use akz_core::aux_bath::{integrate_lyapunov, AuxBathParams};
use akz_core::moments::{integrate, integrate_excess, Sampling};
use akz_core::scaling::fit_power_law;
use akz_core::{BathSpec, DeltaMethod, IntegratorSettings, ModelSpec, QuenchProtocol};
use proptest::prelude::*;

fn models() -> impl Strategy<Value = ModelSpec> {
    prop_oneof![
        Just(ModelSpec::thermodynamic(1.0)),
        (20.0..1e4f64).prop_map(|eta| ModelSpec::qrm(eta, 1.0)),
        (20.0..1e4f64).prop_map(|eta| ModelSpec::lmg(eta, 1.0)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn closed_evolution_stays_pure(model in models(), g_f in 0.05..=1.0f64, tau in 1.0..500.0f64,
                                   r_n in 0.3..3.0f64) {
        let p = QuenchProtocol::new(g_f, tau, r_n).unwrap();
        let t = integrate(&p, &model, &BathSpec::closed(), &IntegratorSettings::default(), Sampling::Uniform(10))
            .unwrap();
        for s in &t.samples {
            prop_assert!((s.state.purity_invariant() - 0.25).abs() < 1e-8);
        }
    }

    #[test]
    fn open_evolution_respects_uncertainty(g_f in 0.05..=1.0f64, tau in 1.0..500.0f64, kappa in 1e-4..0.5f64,
                                           n_th in 0.0..5.0f64) {
        let p = QuenchProtocol::linear(g_f, tau).unwrap();
        let bath = BathSpec::new(kappa, n_th).unwrap();
        let t = integrate(&p, &ModelSpec::thermodynamic(1.0), &bath, &IntegratorSettings::default(),
                          Sampling::Uniform(10)).unwrap();
        for s in &t.samples {
            prop_assert!(s.state.purity_invariant() >= 0.25 - 1e-10);
        }
    }

    #[test]
    fn excess_grows_with_coupling(g_f in 0.5..=1.0f64, tau in 20.0..300.0f64) {
        // δσ is linear in κ at T = 0 for κτ ≪ 1
        let p = QuenchProtocol::linear(g_f, tau).unwrap();
        let m = ModelSpec::thermodynamic(1.0);
        let s = IntegratorSettings::default();
        let d = |k: f64| integrate_excess(&p, &m, &BathSpec::new(k, 0.0).unwrap(), &s, DeltaMethod::Difference)
            .unwrap().delta[0];
        let (a, b) = (d(1e-7), d(2e-7));
        prop_assert!(a > 0.0);
        prop_assert!((b / a - 2.0).abs() < 1e-4);
    }

    #[test]
    fn fit_recovers_exact_power_laws(a in 1e-8..1e3f64, b in -3.0..3.0f64, lo in 0.0..3.0f64, n in 3usize..40) {
        let pts: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let t = 10f64.powf(lo + 2.0 * i as f64 / (n - 1) as f64);
                (t, a * t.powf(b))
            })
            .collect();
        let f = fit_power_law(&pts, None).unwrap();
        prop_assert!((f.exponent - b).abs() < 1e-10);
        prop_assert!((f.amplitude / a - 1.0).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn structured_bath_keeps_covariance_physical(g_f in 0.5..=1.0f64, tau in 5.0..80.0f64,
                                                  kappa in 1e-4..5e-2f64, r_n in 0.5..2.0f64) {
        let p = QuenchProtocol::new(g_f, tau, r_n).unwrap();
        let params = AuxBathParams::ohmic_default(kappa, 20.0);
        let t = integrate_lyapunov(&p, 1.0, &params, &IntegratorSettings::default(), Sampling::Uniform(8)).unwrap();
        for s in &t.samples {
            prop_assert!(s.state.check_physical().is_ok(), "min eig {}", s.state.min_uncertainty_eigenvalue());
        }
    }
}
