//! Characteristic roots of the third-order equation for `G = Φ'` and
//! power-law fits of the ruin probability tail.
//!
//! The roots of `λ³ + q₂(u)λ² + q₁(u)λ + q₀(u) = 0` tend to `1/μ₂`, `−1/μ₁`
//! and `0` as `u → ∞`, and the vanishing root behaves like `−(2a/σ²)/u`.
//! Labels are assigned where the roots are close to their limits and carried
//! to smaller `u` by continuity.

use nalgebra::{Complex, Matrix3};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RuinError};
use crate::model::ModelParams;
use crate::solver::{coefficients_unchecked, ode_coefficients};

pub type Complex64 = Complex<f64>;

/// Roots labelled by their limits `(1/μ₂, −1/μ₁, 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharRoots {
    pub u: f64,
    pub lambda: [Complex64; 3],
    /// Smallest distance between two roots relative to `max(1/μ₁, 1/μ₂)`.
    pub min_gap: f64,
    /// Set when `min_gap` is below the collision threshold; labels at such
    /// points are not reliable.
    pub collision: bool,
}

impl CharRoots {
    pub fn is_real(&self, tol: f64) -> bool {
        self.lambda.iter().all(|l| l.im.abs() <= tol * l.norm().max(1e-300))
    }
}

const COLLISION_GAP: f64 = 1e-6;

/// Companion matrix of the monic cubic with coefficients `(q₀, q₁, q₂)`.
pub fn companion(q0: f64, q1: f64, q2: f64) -> Matrix3<f64> {
    Matrix3::new(0.0, 1.0, 0.0, 0.0, 0.0, 1.0, -q0, -q1, -q2)
}

/// Companion matrix of the limiting equation as `u → ∞`.
pub fn companion_at_infinity(mu1: f64, mu2: f64) -> Matrix3<f64> {
    let m2 = mu1 * mu2;
    companion(0.0, -1.0 / m2, (mu2 - mu1) / m2)
}

/// Columns `(1, λ, λ²)` for `λ = 1/μ₂, −1/μ₁, 0`, and the matching eigenvalues.
pub fn eigenvectors_at_infinity(mu1: f64, mu2: f64) -> (Matrix3<f64>, [f64; 3]) {
    let lams = [1.0 / mu2, -1.0 / mu1, 0.0];
    let q = Matrix3::from_fn(|r, c| lams[c].powi(r as i32));
    (q, lams)
}

fn polish(q: [f64; 3], mut z: Complex64) -> Complex64 {
    for _ in 0..4 {
        let p = ((z + q[2]) * z + q[1]) * z + q[0];
        let dp = (3.0 * z + 2.0 * q[2]) * z + q[1];
        if dp.norm() == 0.0 {
            break;
        }
        let step = p / dp;
        if !step.re.is_finite() || !step.im.is_finite() {
            break;
        }
        z -= step;
        if step.norm() <= 1e-16 * z.norm() {
            break;
        }
    }
    z
}

/// Unlabelled roots of `λ³ + q₂λ² + q₁λ + q₀` from the companion matrix
/// eigenvalues, refined by Newton's method.
pub fn cubic_roots(q0: f64, q1: f64, q2: f64) -> [Complex64; 3] {
    let ev = companion(q0, q1, q2).complex_eigenvalues();
    let mut out = [Complex64::new(0.0, 0.0); 3];
    for (o, e) in out.iter_mut().zip(ev.iter()) {
        *o = polish([q0, q1, q2], Complex64::new(e.re, e.im));
    }
    out
}

fn raw_roots(params: &ModelParams, u: f64) -> [Complex64; 3] {
    let c = coefficients_unchecked(params, u);
    cubic_roots(c.q0, c.q1, c.q2)
}

const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// Distance from each root to its nearest neighbour.
fn isolation(l: &[Complex64; 3]) -> [f64; 3] {
    let d = |i: usize, j: usize| (l[i] - l[j]).norm();
    [d(0, 1).min(d(0, 2)), d(0, 1).min(d(1, 2)), d(0, 2).min(d(1, 2))]
}

/// Relabelling of `next` closest to `prev`, and the largest displacement of
/// a root relative to its isolation in `prev`.
fn best_match(prev: &[Complex64; 3], next: &[Complex64; 3]) -> ([Complex64; 3], f64) {
    let iso = isolation(prev);
    PERMS
        .iter()
        .map(|p| {
            let m = [next[p[0]], next[p[1]], next[p[2]]];
            let cost = (0..3).map(|k| (m[k] - prev[k]).norm() / iso[k]).fold(0.0, f64::max);
            (m, cost)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("six permutations")
}

fn min_gap(l: &[Complex64; 3]) -> f64 {
    [(0, 1), (0, 2), (1, 2)]
        .iter()
        .map(|&(i, j)| (l[i] - l[j]).norm())
        .fold(f64::INFINITY, f64::min)
}

/// Labelled roots at every point of `u_grid` (any order, all positive).
///
/// Labels are fixed by proximity to the limits at an anchor point far beyond
/// the grid and carried down by continuation on a geometric sequence. A step
/// is subdivided whenever some root would move by more than a quarter of its
/// distance to the nearest other root.
pub fn track_roots(params: &ModelParams, u_grid: &[f64]) -> Result<Vec<CharRoots>> {
    let first = *u_grid.first().ok_or_else(|| RuinError::InvalidArgument("empty u grid".into()))?;
    ode_coefficients(params, first)?;
    if let Some(&bad) = u_grid.iter().find(|u| !(**u > 0.0) || !u.is_finite()) {
        return Err(RuinError::InvalidArgument(format!("u = {bad}: roots need u > 0")));
    }
    let scale = (1.0 / params.mu1).max(1.0 / params.mu2);
    let limits = [
        Complex64::new(1.0 / params.mu2, 0.0),
        Complex64::new(-1.0 / params.mu1, 0.0),
        Complex64::new(0.0, 0.0),
    ];
    let u_top = u_grid.iter().copied().fold(0.0, f64::max);
    let s2 = params.sigma * params.sigma;
    let coef_scale = 1.0 + params.a.abs() / s2 + params.c.abs() / s2 + params.alpha() + params.mu1 + params.mu2;
    let anchor = (1e6 * coef_scale * params.mu1.max(params.mu2)).max(10.0 * u_top);
    let (mut current, _) = best_match(&limits, &raw_roots(params, anchor));
    if (0..3).any(|k| (current[k] - limits[k]).norm() > 1e-3 * scale) {
        return Err(RuinError::NonConverged(format!("roots at the anchor u = {anchor:e} are not near their limits")));
    }

    let mut order: Vec<usize> = (0..u_grid.len()).collect();
    order.sort_by(|&i, &j| u_grid[j].total_cmp(&u_grid[i]));
    let mut out = vec![None; u_grid.len()];
    let mut u = anchor;
    const MAX_RATIO: f64 = 1.02;
    for idx in order {
        let target = u_grid[idx];
        while u > target {
            let mut next = (u / MAX_RATIO).max(target);
            loop {
                let (m, moved) = best_match(&current, &raw_roots(params, next));
                let colliding = min_gap(&current) < COLLISION_GAP * scale;
                if moved <= 0.25 || colliding || u / next < 1.0 + 1e-9 {
                    current = m;
                    u = next;
                    break;
                }
                next = (u * next).sqrt();
            }
        }
        let gap = min_gap(&current) / scale;
        out[idx] = Some(CharRoots {
            u: target,
            lambda: current,
            min_gap: gap,
            collision: gap < COLLISION_GAP,
        });
    }
    Ok(out.into_iter().map(|r| r.expect("every grid point visited")).collect())
}

pub fn characteristic_roots(params: &ModelParams, u: f64) -> Result<CharRoots> {
    Ok(track_roots(params, &[u])?[0])
}

/// `(λ₁+λ₂+λ₃ + q₂, λ₁λ₂+λ₂λ₃+λ₁λ₃ − q₁, λ₁λ₂λ₃ + q₀)`, each relative to
/// the magnitude of the terms involved.
pub fn vieta_defects(params: &ModelParams, roots: &CharRoots) -> [f64; 3] {
    let c = coefficients_unchecked(params, roots.u);
    let [l1, l2, l3] = roots.lambda;
    let rel = |value: Complex64, target: f64, size: f64| (value - target).norm() / size.max(target.abs()).max(1e-300);
    [
        rel(l1 + l2 + l3, -c.q2, l1.norm() + l2.norm() + l3.norm()),
        rel(l1 * l2 + l2 * l3 + l1 * l3, c.q1, (l1 * l2).norm() + (l2 * l3).norm() + (l1 * l3).norm()),
        rel(l1 * l2 * l3, -c.q0, (l1 * l2 * l3).norm()),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Regime {
    /// `β > 0`: `Ψ(u) ~ K u^{−β}`.
    PowerLawDecay,
    /// `β <= 0`: `Ψ ≡ 1`.
    CertainRuin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailLaw {
    pub beta: f64,
    pub regime: Regime,
}

pub fn theoretical_tail(params: &ModelParams) -> Result<TailLaw> {
    let beta = params.derive()?.beta;
    let regime = if beta > 0.0 {
        Regime::PowerLawDecay
    } else {
        Regime::CertainRuin
    };
    Ok(TailLaw { beta, regime })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub beta_hat: f64,
    pub k_hat: f64,
    pub fit_range: [f64; 2],
    pub r_squared: f64,
    pub n_points: usize,
}

/// Weighted least squares of `ln ψ` on `ln u` over the points with `u` in
/// `fit_range`. With `stderr` given, point `i` has weight `(ψᵢ/seᵢ)²`, the
/// inverse variance of `ln ψᵢ` to first order.
pub fn fit_power_law(u: &[f64], psi: &[f64], stderr: Option<&[f64]>, fit_range: [f64; 2]) -> Result<PowerLawFit> {
    if u.len() != psi.len() || stderr.is_some_and(|s| s.len() != u.len()) {
        return Err(RuinError::InvalidArgument("curve columns have different lengths".into()));
    }
    let mut pts = Vec::new();
    for i in 0..u.len() {
        if u[i] < fit_range[0] || u[i] > fit_range[1] {
            continue;
        }
        if !(psi[i] > 0.0) {
            return Err(RuinError::InvalidArgument(format!("psi({}) = {} is not positive", u[i], psi[i])));
        }
        let w = match stderr {
            Some(se) if se[i] > 0.0 => (psi[i] / se[i]).powi(2),
            Some(_) => return Err(RuinError::InvalidArgument(format!("zero standard error at u = {}", u[i]))),
            None => 1.0,
        };
        pts.push((u[i].ln(), psi[i].ln(), w));
    }
    let lo = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if pts.len() < 4 || hi - lo < 10f64.ln() * (1.0 - 1e-12) {
        return Err(RuinError::InsufficientRange(format!(
            "{} points spanning {:.3} decades in [{:e}, {:e}]; need 4 points over one decade",
            pts.len(),
            ((hi - lo) / 10f64.ln()).max(0.0),
            fit_range[0],
            fit_range[1]
        )));
    }
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let mx = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| p.2 * (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| p.2 * (p.1 - intercept - slope * p.0).powi(2)).sum();
    Ok(PowerLawFit {
        beta_hat: -slope,
        k_hat: intercept.exp(),
        fit_range,
        r_squared: if syy > 0.0 { 1.0 - sse / syy } else { 1.0 },
        n_points: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Interarrival;

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

    /// Trigonometric/hyperbolic Cardano solution, independent of the
    /// eigenvalue route.
    fn cardano(q0: f64, q1: f64, q2: f64) -> Vec<Complex64> {
        let shift = q2 / 3.0;
        let p = q1 - q2 * q2 / 3.0;
        let q = 2.0 * q2.powi(3) / 27.0 - q2 * q1 / 3.0 + q0;
        let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
        let cbrt = |z: Complex64| if z.norm() == 0.0 { z } else { z.powf(1.0 / 3.0) };
        let s = Complex64::new(disc, 0.0).sqrt();
        let mut c1 = cbrt(Complex64::new(-q / 2.0, 0.0) + s);
        if c1.norm() < 1e-300 {
            c1 = cbrt(Complex64::new(-q / 2.0, 0.0) - s);
        }
        let w = Complex64::new(-0.5, 3f64.sqrt() / 2.0);
        (0..3)
            .map(|k| {
                let ck = c1 * w.powu(k);
                let t = if ck.norm() == 0.0 { ck } else { ck - p / (3.0 * ck) };
                t - shift
            })
            .collect()
    }

    #[test]
    fn eigenvalue_roots_match_cardano() {
        let p = reference();
        for u in [0.05, 0.7, 3.0, 40.0, 900.0] {
            let c = coefficients_unchecked(&p, u);
            let mut ours = cubic_roots(c.q0, c.q1, c.q2).to_vec();
            let theirs = cardano(c.q0, c.q1, c.q2);
            for t in theirs {
                let (k, d) = ours
                    .iter()
                    .enumerate()
                    .map(|(k, o)| (k, (o - t).norm()))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .unwrap();
                assert!(d < 1e-8 * (1.0 + t.norm()), "u = {u}: {t} vs {:?}", ours);
                ours.remove(k);
            }
        }
    }

    #[test]
    fn labels_follow_limits() {
        let p = reference();
        let r = characteristic_roots(&p, 1e4).unwrap();
        assert!((r.lambda[0].re - 0.5).abs() < 1e-3);
        assert!((r.lambda[1].re + 1.0).abs() < 1e-3);
        assert!(r.lambda[2].norm() < 1e-3);
        // λ₁(∞) + λ₂(∞) = −q₂(∞) = −(μ₂ − μ₁)/μ₁μ₂ = −0.5.
        let far = characteristic_roots(&p, 1e9).unwrap();
        assert!(((far.lambda[0] + far.lambda[1]).re + 0.5).abs() < 1e-8);
        for u in [1e2, 1e3, 1e4] {
            let l3 = characteristic_roots(&p, u).unwrap().lambda[2];
            assert!((l3.re * u + 2.0).abs() < 10.0 / u);
        }
    }

    #[test]
    fn tracking_is_consistent_under_refinement_and_order() {
        let p = reference();
        let grid: Vec<f64> = (0..200).map(|i| 1e-2 * 1.08f64.powi(i)).collect();
        let fine: Vec<f64> = (0..200 * 16).map(|i| 1e-2 * 1.08f64.powf(i as f64 / 16.0)).collect();
        let tracked = track_roots(&p, &grid).unwrap();
        let refined = track_roots(&p, &fine).unwrap();
        for (i, r) in tracked.iter().enumerate() {
            let f = &refined[16 * i];
            for k in 0..3 {
                assert!((r.lambda[k] - f.lambda[k]).norm() <= 1e-12 * r.lambda[k].norm().max(1e-300), "u = {}", r.u);
            }
        }
        for w in refined.windows(2) {
            let iso = isolation(&w[1].lambda);
            for k in 0..3 {
                assert!((w[0].lambda[k] - w[1].lambda[k]).norm() < 0.5 * iso[k], "jump at u = {}", w[0].u);
            }
        }
        let reversed: Vec<f64> = grid.iter().rev().copied().collect();
        let back = track_roots(&p, &reversed).unwrap();
        for (a, b) in tracked.iter().zip(back.iter().rev()) {
            assert_eq!(a.lambda, b.lambda);
        }
        for r in &tracked {
            assert!(vieta_defects(&p, r).iter().all(|&d| d < 1e-10), "{:?}", vieta_defects(&p, r));
        }
    }

    #[test]
    fn limiting_eigenvectors() {
        let (q, lams) = eigenvectors_at_infinity(1.0, 2.0);
        let a = companion_at_infinity(1.0, 2.0);
        let lhs = a * q;
        let rhs = q * Matrix3::from_diagonal(&lams.into());
        assert!((lhs - rhs).abs().max() < 1e-15);
    }

    #[test]
    fn exact_power_law_is_recovered() {
        let u: Vec<f64> = (0..30).map(|i| 10f64.powf(i as f64 / 10.0)).collect();
        let psi: Vec<f64> = u.iter().map(|x| 2.0 / x).collect();
        let fit = fit_power_law(&u, &psi, None, [1.0, 1e3]).unwrap();
        assert!((fit.beta_hat - 1.0).abs() < 1e-10);
        assert!((fit.k_hat - 2.0).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn perturbed_power_law_stays_close() {
        let u: Vec<f64> = (0..=40).map(|i| 1e2 * 10f64.powf(i as f64 / 20.0)).collect();
        let psi: Vec<f64> = u.iter().map(|x| 2.0 / x * (1.0 + 1.0 / x)).collect();
        let fit = fit_power_law(&u, &psi, None, [1e2, 1e4]).unwrap();
        assert!(fit.beta_hat >= 0.99 && fit.beta_hat <= 1.01, "{}", fit.beta_hat);
    }

    #[test]
    fn fit_needs_a_decade() {
        let u = [10.0, 20.0, 40.0, 80.0];
        let psi = [0.1, 0.05, 0.025, 0.0125];
        assert!(matches!(fit_power_law(&u, &psi, None, [1.0, 1e3]), Err(RuinError::InsufficientRange(_))));
        assert!(matches!(fit_power_law(&u[..3], &psi[..3], None, [1.0, 1e3]), Err(RuinError::InsufficientRange(_))));
    }

    #[test]
    fn regimes() {
        let p = reference();
        assert_eq!(theoretical_tail(&p).unwrap(), TailLaw { beta: 1.0, regime: Regime::PowerLawDecay });
        let b0 = ModelParams { a: 0.5, ..p };
        assert_eq!(theoretical_tail(&b0).unwrap().regime, Regime::CertainRuin);
        let neg = ModelParams { a: 0.3, sigma: 0.8f64.sqrt(), ..p };
        let t = theoretical_tail(&neg).unwrap();
        assert!((t.beta + 0.25).abs() < 1e-12);
        assert_eq!(t.regime, Regime::CertainRuin);
    }
}
