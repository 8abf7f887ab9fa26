use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ruinkit::asymptotics::fit_power_law;
use ruinkit::fundamental::fundamental_solutions;
use ruinkit::numerics::grid_derivative;
use ruinkit::solver::{solve_survival, GridSolution, LeftBc, SolveOptions};
use ruinkit::{Interarrival, ModelParams};

fn reference() -> ModelParams {
    ModelParams {
        a: 1.0,
        sigma: 1.0,
        c: 1.0,
        alpha1: 1.0,
        alpha2: 0.5,
        mu1: 1.0,
        mu2: 2.0,
        interarrival: Interarrival::PoissonExponential,
    }
}

fn check_shape(p: &ModelParams, s: &GridSolution) {
    let n = s.u.len();
    for i in 0..n {
        assert!((0.0..=1.0).contains(&s.phi[i]), "phi({}) = {}", s.u[i], s.phi[i]);
        assert!(s.g[i] >= -1e-12, "g({}) = {}", s.u[i], s.g[i]);
        assert!(s.i1[i] >= -1e-12 && s.i2[i] >= -1e-12);
        assert!((s.phi[i] + s.psi[i] - 1.0).abs() < 1e-15);
    }
    assert!(s.phi.windows(2).all(|w| w[1] >= w[0] - 1e-14));
    let phi_end = s.phi[n - 1];
    assert!((s.i1[n - 1] - p.mu1 * phi_end).abs() < 1e-6);
    assert!((s.i2[n - 1] - p.mu2 * phi_end).abs() < 1e-6);
}

#[test]
fn reference_solution_is_a_distribution_function() {
    let p = reference();
    let s = solve_survival(&p, &SolveOptions::default()).unwrap();
    check_shape(&p, &s);
    assert_eq!(s.left_bc, LeftBc::Regular);
    assert!(s.phi[s.u.len() - 1] >= 0.99);
    assert!(s.tail > 0.0);
}

#[test]
fn negative_premium_uses_absorbing_boundary() {
    let p = ModelParams { c: -0.5, ..reference() };
    let s = solve_survival(&p, &SolveOptions::default()).unwrap();
    check_shape(&p, &s);
    assert_eq!(s.left_bc, LeftBc::Absorbing);
    assert_eq!(s.phi[0], 0.0);
}

#[test]
fn halving_the_step_reduces_the_residual() {
    let p = reference();
    let coarse = SolveOptions { n_points: 4097, ..SolveOptions::default() };
    let r1 = solve_survival(&p, &coarse).unwrap().max_scaled_residual(&p);
    let r2 = solve_survival(&p, &coarse.refined()).unwrap().max_scaled_residual(&p);
    assert!(r1 / r2 >= 3.0, "{r1:e} -> {r2:e}");
}

/// `𝒯 I₁ = μ₁μ₂Φ' − μ₁Φ` with `𝒯f = μ₁μ₂f'' + (μ₂ − μ₁)f' − f`.
#[test]
fn convolution_satisfies_kernel_identity() {
    let p = reference();
    let s = solve_survival(&p, &SolveOptions::default()).unwrap();
    let d1 = grid_derivative(&s.u, &s.i1, 1, 3);
    let d2 = grid_derivative(&s.u, &s.i1, 2, 3);
    let m2 = p.mu1 * p.mu2;
    let n = s.u.len();
    let mut worst = 0.0f64;
    for i in 1..n - 1 {
        let lhs = m2 * d2[i] + (p.mu2 - p.mu1) * d1[i] - s.i1[i];
        let rhs = m2 * s.g[i] - p.mu1 * s.phi[i];
        worst = worst.max((lhs - rhs).abs());
    }
    assert!(worst < 1e-4, "{worst:e}");
}

#[test]
fn third_order_residual_is_consistent_with_ide_residual() {
    let p = reference();
    let s = solve_survival(&p, &SolveOptions::default()).unwrap();
    let ide = s.residual_ide.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let n = s.u.len();
    // Interior: away from the left boundary layer and the one-sided stencils.
    let ode3 = (0..n - 2)
        .filter(|&i| s.u[i] >= 10.0 * s.u[0])
        .fold(0.0f64, |m, i| m.max(s.residual_ode3[i].abs()));
    assert!(ode3 <= 10.0 * ide, "ode3 {ode3:e}, ide {ide:e}");
}

/// `Ψ` is a combination of `H₂` and `H₃`; `H₂` is exponentially small in the
/// tail, so `Ψ/H₃` must flatten out.
#[test]
fn tail_is_proportional_to_power_mode() {
    let p = reference();
    let s = solve_survival(&p, &SolveOptions::default()).unwrap();
    let f = fundamental_solutions(&p, 50.0, 1e5, 8001).unwrap();
    let ratios: Vec<f64> = f
        .u
        .iter()
        .zip(&f.big_h3)
        .filter(|(u, _)| **u >= 100.0 && **u <= 1e4)
        .map(|(&u, &h)| s.psi_at(u).unwrap() / h)
        .collect();
    let (lo, hi) = ratios.iter().fold((f64::MAX, f64::MIN), |(a, b), &r| (a.min(r), b.max(r)));
    assert!(lo > 0.0 && (hi - lo) / hi < 2e-3, "{lo} {hi}");
}

#[test]
fn fitted_exponent_tracks_beta_for_random_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..20 {
        let sigma: f64 = rng.random_range(0.5..1.5);
        let beta: f64 = rng.random_range(0.2..2.5);
        let p = ModelParams {
            a: 0.5 * sigma * sigma * (beta + 1.0),
            sigma,
            c: rng.random_range(-1.0..2.0),
            alpha1: rng.random_range(0.2..2.0),
            alpha2: rng.random_range(0.0..2.0),
            mu1: rng.random_range(0.5..3.0),
            mu2: rng.random_range(0.5..3.0),
            interarrival: Interarrival::PoissonExponential,
        };
        let s = solve_survival(&p, &SolveOptions::default()).unwrap_or_else(|e| panic!("{p:?}: {e}"));
        check_shape(&p, &s);
        let fit = fit_power_law(&s.u, &s.psi, None, [1e2, 1e4]).unwrap();
        assert!((fit.beta_hat - beta).abs() <= 0.15 * beta, "{p:?}: beta_hat {} vs {beta}", fit.beta_hat);
        assert!(fit.k_hat > 0.0);
    }
}
