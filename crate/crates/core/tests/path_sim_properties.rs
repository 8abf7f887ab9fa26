use proptest::prelude::*;
use rand::Rng;
use ruinkit::mc::sample_chain_coefficients;
use ruinkit::path_sim::{
    embedded_chain_direct, simulate_path, step_embedded, GbmBridge, GbmStepSample, Horizon, PathStatus,
};
use ruinkit::rng::PathRng;
use ruinkit::{Interarrival, ModelParams};

fn params(a: f64, sigma: f64, c: f64) -> ModelParams {
    ModelParams {
        a,
        sigma,
        c,
        alpha1: 1.0,
        alpha2: 0.5,
        mu1: 1.0,
        mu2: 2.0,
        interarrival: Interarrival::PoissonExponential,
    }
}

fn iterate(u: f64, c: f64, samples: &[(f64, f64, f64)]) -> Vec<f64> {
    let mut x = u;
    samples
        .iter()
        .map(|&(a, j, xi)| {
            let step = GbmStepSample { dt: 1.0, a, j, nsub: 1 };
            x = step_embedded(x, &step, xi, c).1;
            x
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn recursion_matches_closed_form(
        seed in any::<u64>(),
        u in 0.0f64..100.0,
        a in -1.0f64..2.0,
        sigma in 0.0f64..2.0,
        c in -2.0f64..2.0,
    ) {
        let p = params(a, sigma, c);
        let mut rng = PathRng::new(seed, 0);
        let samples = sample_chain_coefficients(&p, 20, 16, &mut rng).unwrap();
        let direct = embedded_chain_direct(&p, u, &samples).unwrap();
        let iterated = iterate(u, c, &samples);
        // Compare against the size of the terms rather than the possibly
        // cancelling sum.
        let mut scale = u;
        for (k, (d, it)) in direct.iter().zip(&iterated).enumerate() {
            let (ak, jk, xik) = samples[k];
            scale = ak * scale + (c * jk).abs() + xik.abs();
            prop_assert!((d - it).abs() <= 1e-10 * scale.max(f64::MIN_POSITIVE), "step {k}: {d} vs {it}");
        }
    }

    #[test]
    fn simulation_is_deterministic(seed in any::<u64>(), u in 0.1f64..20.0, c in -1.0f64..2.0) {
        let p = params(1.0, 1.0, c);
        let h = Horizon { max_jumps: 200, max_time: None, upper_barrier: Some(1e3) };
        let a = simulate_path(&p, u, &h, 16, &mut PathRng::new(seed, 3)).unwrap();
        let b = simulate_path(&p, u, &h, 16, &mut PathRng::new(seed, 3)).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn closed_form_examples() {
    let p = params(1.0, 1.0, 0.0);
    assert_eq!(embedded_chain_direct(&p, 1.0, &[(2.0, 0.0, 3.0)]).unwrap(), vec![5.0]);
    let zero = vec![(1.7, 0.0, 0.0); 10];
    assert!(embedded_chain_direct(&p, 0.0, &zero).unwrap().iter().all(|&x| x == 0.0));
}

/// With `c < 0` the reserve between jumps is monotone in sign, so checking the
/// pre-jump value detects every crossing visible on a finer bridge.
#[test]
fn endpoint_check_detects_interior_ruin() {
    let mut rng = PathRng::new(2024, 0);
    let mut ruined = 0;
    for i in 0..10_000u64 {
        let sigma = rng.random_range(0.1..2.0);
        let kappa = rng.random_range(-1.0..1.0);
        let c: f64 = -rng.random_range(0.1..3.0);
        let dt = rng.random_range(0.01..3.0);
        let x = rng.random_range(0.0..2.0) * c.abs() * dt;
        let mut stream = PathRng::new(77, i);
        let coarse = GbmBridge::sample(kappa, sigma, dt, 16, &mut stream);
        let fine = coarse.refine(&mut stream).refine(&mut stream);
        let (x_pre, _) = step_embedded(x, &fine.step(), 0.0, c);
        let path_min = fine.reserve_path(x, c).into_iter().fold(f64::INFINITY, f64::min);
        let endpoint_ruin = x_pre <= 0.0;
        let path_ruin = path_min <= 0.0;
        // Equal up to rounding in the last bit.
        if endpoint_ruin != path_ruin {
            assert!(x_pre.abs() < 1e-12 * x.max(1.0), "step {i}: x_pre = {x_pre}, path min = {path_min}");
        }
        ruined += endpoint_ruin as u32;
    }
    assert!(ruined > 1000 && ruined < 9000, "{ruined} ruined steps: the sample is unbalanced");
}

#[test]
fn trapezoid_j_converges_under_refinement() {
    let mut ratios = Vec::new();
    for i in 0..1000u64 {
        let mut rng = PathRng::new(99, i);
        let b1 = GbmBridge::sample(0.3, 1.0, 1.0, 8, &mut rng);
        let b2 = b1.refine(&mut rng);
        let b3 = b2.refine(&mut rng);
        let (j1, j2, j3) = (b1.step().j, b2.step().j, b3.step().j);
        let d1 = (j2 - j1).abs();
        if d1 > 0.0 {
            ratios.push((j3 - j2).abs() / d1);
        }
    }
    ratios.sort_by(f64::total_cmp);
    let median = ratios[ratios.len() / 2];
    assert!(median <= 0.6, "median refinement ratio {median}");
}

#[test]
fn tiny_capital_with_negative_premium_is_ruined() {
    let p = params(1.0, 1.0, -1.0);
    let mut previous = 0.0;
    for max_jumps in [1u64, 2, 5] {
        let h = Horizon { max_jumps, max_time: None, upper_barrier: None };
        let n = 2000;
        let ruined = (0..n)
            .filter(|&i| {
                let o = simulate_path(&p, 1e-9, &h, 16, &mut PathRng::new(5, i)).unwrap();
                o.status == PathStatus::Ruined
            })
            .count() as f64
            / n as f64;
        assert!(ruined >= previous);
        previous = ruined;
    }
    assert!(previous > 0.999, "{previous}");
}
