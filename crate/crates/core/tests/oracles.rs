use levy_indifference::oracles::*;
use levy_indifference::*;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};

fn reference() -> MertonParams {
    MertonParams::martingale(0.2, 5.0, -0.05, 0.1).unwrap()
}

#[test]
fn reference_series_and_monte_carlo_agree() {
    let opt = OptionSpec::put(1.0, 1.0, 1.0).unwrap();
    let model = memm_model(&LevyModel::merton(&reference(), DEFAULT_TRUNCATION).unwrap()).unwrap();
    let mc = mc_linear_price(&opt, &model, 1_000_000, 42).unwrap();
    let series = merton_series_price(&opt, &reference()).unwrap();
    assert!((mc.value - series.value).abs() <= 3.0 * mc.error_estimate, "{mc:?} vs {series:?}");
    assert_eq!(mc.seed, Some(42));
}

#[test]
fn gaussian_monte_carlo_matches_black_scholes() {
    let opt = OptionSpec::put(1.1, 0.5, 1.0).unwrap();
    let model = LevyModel::from_atoms(0.3, vec![], Drift::Martingale).unwrap();
    let mc = mc_linear_price(&opt, &model, 1_000_000, 3).unwrap();
    let bs = bs_price(&opt, &BsContext::at_inception(0.3).unwrap(), 1.0);
    assert!((mc.value - bs).abs() <= 4.0 * mc.error_estimate);
}

#[test]
fn monte_carlo_with_atoms_matches_direct_expectation() {
    // one atom, no diffusion: S_T = S0 e^{-w z T} (1 + z)^N with N ~ Poisson(w T)
    let (z, w, t) = (0.3, 2.0, 1.0);
    let opt = OptionSpec::put(1.0, t, 1.0).unwrap();
    let model = LevyModel::from_atoms(0.0, vec![Atom { size: z, mass: w }], Drift::Martingale).unwrap();
    let mut exact = 0.0;
    let mut weight = (-w * t).exp();
    for n in 0..60 {
        exact += weight * opt.payoff((-w * z * t).exp() * (1.0f64 + z).powi(n));
        weight *= w * t / (n + 1) as f64;
    }
    let mc = mc_linear_price(&opt, &model, 400_000, 9).unwrap();
    assert!((mc.value - exact).abs() <= 4.0 * mc.error_estimate, "{} vs {exact}", mc.value);
}

#[test]
fn monte_carlo_is_independent_of_thread_count() {
    let opt = OptionSpec::put(1.0, 1.0, 1.0).unwrap();
    let model = LevyModel::merton(&reference(), DEFAULT_TRUNCATION).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let single = pool.install(|| mc_linear_price(&opt, &model, 50_000, 5).unwrap());
    assert_eq!(single, mc_linear_price(&opt, &model, 50_000, 5).unwrap());
}

#[test]
fn gamma_integral_agrees_with_time_quadrature_on_a_grid() {
    for m in [0.7, 0.85, 1.0, 1.15, 1.3] {
        for t in [0.1, 0.5, 1.0, 2.0, 5.0] {
            let opt = OptionSpec::put(1.0, t, m).unwrap();
            let closed = put_gamma_integral(&opt, 0.3).unwrap();
            let numeric = jump_sensitivity_numeric(&opt, 0.3).unwrap();
            assert!((closed - numeric.value).abs() <= 1e-6 * closed, "m {m} t {t}: {closed} vs {numeric:?}");
        }
    }
}

proptest! {
    #![proptest_config(Config {
        cases: 20,
        rng_seed: RngSeed::Fixed(41),
        failure_persistence: None,
        ..Config::default()
    })]

    #[test]
    fn series_and_monte_carlo_agree_on_random_merton_models(
        sigma in 0.05..0.4f64,
        lambda in 0.0..8.0f64,
        gamma in -0.2..0.1f64,
        delta in 0.02..0.3f64,
        strike in 0.7..1.3f64,
        seed in 0u64..1000,
    ) {
        let p = MertonParams::martingale(sigma, lambda, gamma, delta).unwrap();
        let opt = OptionSpec::put(strike, 1.0, 1.0).unwrap();
        let series = merton_series_price(&opt, &p).unwrap();
        let mc = mc_linear_price(&opt, &LevyModel::merton(&p, DEFAULT_TRUNCATION).unwrap(), 200_000, seed).unwrap();
        prop_assert!((series.value - mc.value).abs() <= 3.0 * mc.error_estimate,
            "{} vs {} +- {}", series.value, mc.value, mc.error_estimate);
    }
}
