use proptest::prelude::*;
use ruinkit::mc::{estimate_lower_bound, estimate_ruin, estimate_ruin_horizons, ladder_stats, McSettings};
use ruinkit::path_sim::Horizon;
use ruinkit::{Interarrival, ModelParams};

fn classical() -> ModelParams {
    ModelParams {
        a: 0.0,
        sigma: 0.0,
        c: 1.5,
        alpha1: 1.0,
        alpha2: 0.0,
        mu1: 1.0,
        mu2: 1.0,
        interarrival: Interarrival::PoissonExponential,
    }
}

/// Ruin probability of the Cramér-Lundberg model with exponential claims:
/// `(λμ/c) exp(-(1/μ - λ/c) u)`.
fn lundberg(lambda: f64, mu: f64, c: f64, u: f64) -> f64 {
    lambda * mu / c * (-(1.0 / mu - lambda / c) * u).exp()
}

#[test]
fn lundberg_value() {
    assert!((lundberg(1.0, 1.0, 1.5, 5.0) - 0.12591706855837453).abs() < 1e-15);
}

#[test]
fn classical_oracle_within_three_standard_errors() {
    let truth = lundberg(1.0, 1.0, 1.5, 5.0);
    let horizon = Horizon { max_jumps: 10_000, max_time: None, upper_barrier: Some(500.0) };
    let est = estimate_ruin(&classical(), 5.0, &horizon, &McSettings::new(100_000, 17)).unwrap();
    assert!((est.p_hat - truth).abs() <= 3.0 * est.stderr, "{} vs {truth} (se {})", est.p_hat, est.stderr);
    assert_eq!(est.censored_fraction, 0.0);
}

#[test]
fn wilson_intervals_are_calibrated() {
    let truth = lundberg(1.0, 1.0, 1.5, 5.0);
    let horizon = Horizon { max_jumps: 10_000, max_time: None, upper_barrier: Some(500.0) };
    let covered = (0..100u64)
        .filter(|&rep| {
            let est = estimate_ruin(&classical(), 5.0, &horizon, &McSettings::new(2000, 1000 + rep)).unwrap();
            est.ci95.0 <= truth && truth <= est.ci95.1
        })
        .count();
    assert!(covered >= 90, "{covered}/100 intervals cover the true value");
}

/// For a symmetric continuous random walk, `P(θ₁ > n) = C(2n, n) / 4ⁿ`
/// whatever the step law (Sparre Andersen).
fn sparre_andersen(n: u64) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * (2 * k - 1) as f64 / (2 * k) as f64)
}

#[test]
fn ladder_tail_at_zero_drift_matches_fluctuation_identity() {
    let p = ModelParams { a: 0.5, sigma: 1.0, ..classical() };
    let n_walks = 40_000;
    let st = ladder_stats(&p, n_walks, 1024, 8, 1).unwrap();
    for &(n, tail) in &st.tail {
        let exact = sparre_andersen(n);
        let se = (exact * (1.0 - exact) / n_walks as f64).sqrt();
        assert!((tail - exact).abs() <= 4.0 * se, "n = {n}: {tail} vs {exact}");
        // The n^{-1/2} envelope: sqrt(n) P(θ₁ > n) stays near 1/sqrt(π).
        let scaled = tail * (n as f64).sqrt();
        assert!(scaled > 0.4 && scaled < 0.8, "n = {n}: {scaled}");
    }
}

#[test]
fn lower_bound_events_are_observed_for_negative_premium() {
    let p = ModelParams {
        a: 1.0,
        sigma: 1.0,
        c: -0.5,
        alpha1: 1.0,
        alpha2: 0.5,
        mu1: 1.0,
        mu2: 2.0,
        interarrival: Interarrival::PoissonExponential,
    };
    let est = estimate_lower_bound(&p, 0.5, 9.0, &McSettings::new(200_000, 4).with_nsub(16)).unwrap();
    assert!(est.p_gamma > 0.0 && est.p_d > 0.0, "{est:?}");
    assert!(est.beta_star.unwrap() > 0.0);
    assert!(est.flags.is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// Longer horizons can only add ruined paths of the same seeded family.
    #[test]
    fn ruin_frequency_grows_with_horizon(seed in any::<u64>(), u in 0.5f64..5.0) {
        let p = ModelParams { a: 0.3, sigma: 0.8f64.sqrt(), c: 1.0, alpha1: 1.0, alpha2: 0.5, mu1: 1.0, mu2: 1.0, interarrival: Interarrival::PoissonExponential };
        let horizon = Horizon { max_jumps: 256, max_time: None, upper_barrier: None };
        let ladder = estimate_ruin_horizons(&p, u, &horizon, &[4, 16, 64, 256], &McSettings::new(500, seed).with_nsub(4)).unwrap();
        for w in ladder.windows(2) {
            prop_assert!(w[0].n_ruined <= w[1].n_ruined);
            prop_assert!(w[0].p_hat + w[0].censored_fraction <= 1.0 + 1e-15);
        }
    }
}
