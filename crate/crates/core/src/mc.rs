//! Parallel Monte Carlo estimation of ruin probabilities.
//!
//! Path `i` always draws from `PathRng::new(seed, i)` and per-path results are
//! reduced with integer counts, so estimates are a pure function of the inputs
//! and the seed, whatever the worker count. All points of a ruin curve reuse
//! the same path streams (common random numbers); since the reserve is
//! pathwise increasing in `u`, the estimated curve is then non-increasing.

use std::time::Instant;

use rand::Rng;
use rand_distr::{Exp1, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RuinError};
use crate::model::{Interarrival, ModelParams};
use crate::path_sim::{Horizon, PathOutcome, PathStatus, ReserveSimulator, DEFAULT_NSUB};
use crate::rng::PathRng;

const Z95: f64 = 1.959963984540054;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSettings {
    pub n_paths: u64,
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_nsub")]
    pub nsub: usize,
    /// Censored fraction above which an estimate is flagged.
    #[serde(default = "default_censor_threshold")]
    pub censor_threshold: f64,
}

fn default_workers() -> usize {
    1
}
fn default_nsub() -> usize {
    DEFAULT_NSUB
}
fn default_censor_threshold() -> f64 {
    0.01
}

impl McSettings {
    pub fn new(n_paths: u64, seed: u64) -> Self {
        McSettings {
            n_paths,
            seed,
            workers: 1,
            nsub: DEFAULT_NSUB,
            censor_threshold: default_censor_threshold(),
        }
    }

    pub fn with_workers(self, workers: usize) -> Self {
        McSettings { workers, ..self }
    }

    pub fn with_nsub(self, nsub: usize) -> Self {
        McSettings { nsub, ..self }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MCEstimate {
    pub u: f64,
    /// Fraction of paths ruined within the horizon.
    pub p_hat: f64,
    pub stderr: f64,
    /// Wilson 95% interval.
    pub ci95: (f64, f64),
    pub n_paths: u64,
    pub n_ruined: u64,
    pub censored_fraction: f64,
    /// Fraction of paths classified as survivors on reaching the upper barrier.
    pub barrier_fraction: f64,
    /// Wall-clock seconds. Not serialized, so output files stay deterministic.
    #[serde(skip_serializing)]
    pub runtime: f64,
    pub seed: u64,
    /// Set when `censored_fraction` exceeds the configured threshold.
    pub censoring_flag: bool,
}

impl MCEstimate {
    fn from_tally(u: f64, t: &Tally, settings: &McSettings, runtime: f64) -> Self {
        let n = t.paths.max(1) as f64;
        let p = t.ruined as f64 / n;
        let censored_fraction = t.censored as f64 / n;
        MCEstimate {
            u,
            p_hat: p,
            stderr: (p * (1.0 - p) / n).sqrt(),
            ci95: wilson_interval(t.ruined, t.paths, Z95),
            n_paths: t.paths,
            n_ruined: t.ruined,
            censored_fraction,
            barrier_fraction: t.barrier as f64 / n,
            runtime,
            seed: settings.seed,
            censoring_flag: censored_fraction > settings.censor_threshold,
        }
    }

    /// Upper bound on the infinite-horizon ruin probability: censored paths
    /// may all be ruined, and barrier survivors are ruined with probability at
    /// most `psi_at_barrier`.
    pub fn upper_bound(&self, psi_at_barrier: f64) -> f64 {
        (self.p_hat + self.censored_fraction + self.barrier_fraction * psi_at_barrier).min(1.0)
    }
}

/// Wilson score interval for `k` successes out of `n`.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if k == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if k as f64 == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Tally {
    paths: u64,
    ruined: u64,
    censored: u64,
    barrier: u64,
}

impl Tally {
    fn merge(self, o: Tally) -> Tally {
        Tally {
            paths: self.paths + o.paths,
            ruined: self.ruined + o.ruined,
            censored: self.censored + o.censored,
            barrier: self.barrier + o.barrier,
        }
    }

    /// Classification of `outcome` as if the horizon had been cut at
    /// `max_jumps` jumps.
    fn of(outcome: &PathOutcome, max_jumps: u64) -> Tally {
        let finished = outcome.n_jumps <= max_jumps;
        let mut t = Tally {
            paths: 1,
            ..Tally::default()
        };
        match outcome.status {
            PathStatus::Ruined if finished => t.ruined = 1,
            PathStatus::SurvivedToBarrier if finished => t.barrier = 1,
            _ => t.censored = 1,
        }
        t
    }
}

/// Runs `f` on a dedicated pool with `workers` threads.
pub(crate) fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| RuinError::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn check_settings(settings: &McSettings) -> Result<()> {
    if settings.n_paths == 0 {
        return Err(RuinError::InvalidArgument("n_paths must be >= 1".into()));
    }
    Ok(())
}

/// Default horizon for initial capitals up to `u_max`: `10⁴` jumps and an
/// upper barrier at `100 u_max`. No barrier when ruin is certain
/// (`σ > 0`, `κ <= 0`), since surviving to the barrier proves nothing there.
pub fn auto_horizon(params: &ModelParams, u_max: f64) -> Horizon {
    let certain_ruin = params.sigma > 0.0 && params.kappa() <= 0.0;
    Horizon {
        upper_barrier: (!certain_ruin).then_some(100.0 * u_max),
        ..Horizon::default()
    }
}

pub fn estimate_ruin(params: &ModelParams, u: f64, horizon: &Horizon, settings: &McSettings) -> Result<MCEstimate> {
    let mut v = estimate_ruin_horizons(params, u, horizon, &[horizon.max_jumps], settings)?;
    Ok(v.remove(0))
}

/// Ruin estimates for several jump horizons from one set of simulated paths.
///
/// Path `i` consumes the same stream whatever the horizon, so the estimate
/// for horizon `h` is identical to `estimate_ruin` run with
/// `max_jumps = h`. Every entry of `max_jumps` must not exceed
/// `horizon.max_jumps`.
pub fn estimate_ruin_horizons(
    params: &ModelParams,
    u: f64,
    horizon: &Horizon,
    max_jumps: &[u64],
    settings: &McSettings,
) -> Result<Vec<MCEstimate>> {
    if !(u > 0.0) {
        return Err(RuinError::InvalidArgument(format!("initial capital u = {u} must be > 0")));
    }
    check_settings(settings)?;
    if let Some(&h) = max_jumps.iter().find(|&&h| h > horizon.max_jumps) {
        return Err(RuinError::InvalidArgument(format!(
            "horizon {h} exceeds the simulated horizon {}",
            horizon.max_jumps
        )));
    }
    let sim = ReserveSimulator::new(params, settings.nsub)?;
    let start = Instant::now();
    let k = max_jumps.len();
    let tallies = with_workers(settings.workers, || {
        (0..settings.n_paths)
            .into_par_iter()
            .map(|i| {
                let mut rng = PathRng::new(settings.seed, i);
                let out = sim.simulate(u, horizon, &mut rng);
                max_jumps.iter().map(|&h| Tally::of(&out, h)).collect::<Vec<_>>()
            })
            .reduce(
                || vec![Tally::default(); k],
                |a, b| a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect(),
            )
    })?;
    let runtime = start.elapsed().as_secs_f64();
    Ok(tallies
        .iter()
        .map(|t| MCEstimate::from_tally(u, t, settings, runtime))
        .collect())
}

/// One estimate per point of `u_grid`, all from the same path streams.
pub fn estimate_ruin_curve(
    params: &ModelParams,
    u_grid: &[f64],
    horizon: &Horizon,
    settings: &McSettings,
) -> Result<Vec<MCEstimate>> {
    if let Some(i) = (1..u_grid.len()).find(|&i| !(u_grid[i] > u_grid[i - 1])) {
        return Err(RuinError::NonMonotoneGrid(i));
    }
    if u_grid.first().is_some_and(|&u| !(u > 0.0)) {
        return Err(RuinError::InvalidArgument("u grid must be positive".into()));
    }
    u_grid
        .iter()
        .map(|&u| estimate_ruin(params, u, horizon, settings))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundEstimate {
    pub rho: f64,
    pub b: f64,
    pub n_samples: u64,
    pub gamma_count: u64,
    pub d_count: u64,
    /// Estimate of `P(A_1 <= rho, B_1 <= 1/rho)`.
    pub p_gamma: f64,
    /// Estimate of `P(A_1 <= 1/rho, B_1 <= -b)`.
    pub p_d: f64,
    /// `ln p_gamma / ln rho`, when `0 < p_gamma < 1`.
    pub beta_star: Option<f64>,
    /// `b - 1 / (rho^2 (1 - rho))`.
    pub b1: f64,
    /// `exp((2 + ln b1 / ln rho) ln p_gamma) p_d`: for `u > b1`,
    /// `u^beta_star Psi(u)` is bounded below by this constant.
    pub lower_constant: Option<f64>,
    pub flags: Vec<String>,
}

/// `ln p_gamma / ln rho`, defined for `0 < p_gamma < 1`.
pub fn beta_star(p_gamma: f64, rho: f64) -> Option<f64> {
    (p_gamma > 0.0 && p_gamma < 1.0).then(|| p_gamma.ln() / rho.ln())
}

/// Estimates the probabilities of the events
/// `Gamma = {A_1 <= rho, B_1 <= 1/rho}` and `D = {A_1 <= 1/rho, B_1 <= -b}`
/// on which the power-law lower bound for the ruin probability is built.
pub fn estimate_lower_bound(params: &ModelParams, rho: f64, b: f64, settings: &McSettings) -> Result<LowerBoundEstimate> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(RuinError::InvalidArgument(format!("rho = {rho} must lie in ]0, 1[")));
    }
    let b_min = 1.0 / (rho * rho * (1.0 - rho));
    if !(b > b_min) {
        return Err(RuinError::InvalidArgument(format!(
            "b = {b} must exceed 1/(rho^2 (1 - rho)) = {b_min}"
        )));
    }
    check_settings(settings)?;
    let sim = ReserveSimulator::new(params, settings.nsub)?;
    let c = params.c;
    let (gamma_count, d_count) = with_workers(settings.workers, || {
        (0..settings.n_paths)
            .into_par_iter()
            .map(|i| {
                let mut rng = PathRng::new(settings.seed, i);
                let (step, xi) = sim.sample_coefficients(&mut rng);
                let bk = xi + c * step.j;
                let gamma = step.a <= rho && bk <= 1.0 / rho;
                let d = step.a <= 1.0 / rho && bk <= -b;
                (gamma as u64, d as u64)
            })
            .reduce(|| (0, 0), |x, y| (x.0 + y.0, x.1 + y.1))
    })?;
    let n = settings.n_paths as f64;
    let p_gamma = gamma_count as f64 / n;
    let p_d = d_count as f64 / n;
    let mut flags = Vec::new();
    if gamma_count == 0 {
        flags.push("GAMMA_UNOBSERVED: no sample fell in the contraction event".to_string());
    }
    if d_count == 0 {
        flags.push("D_UNOBSERVED: no sample fell in the large-loss event".to_string());
    }
    let beta_star = beta_star(p_gamma, rho);
    let b1 = b - b_min;
    let lower_constant = (p_gamma > 0.0 && p_d > 0.0).then(|| ((2.0 + b1.ln() / rho.ln()) * p_gamma.ln()).exp() * p_d);
    Ok(LowerBoundEstimate {
        rho,
        b,
        n_samples: settings.n_paths,
        gamma_count,
        d_count,
        p_gamma,
        p_d,
        beta_star,
        b1,
        lower_constant,
        flags,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderStats {
    pub max_len: u64,
    /// First descending ladder epoch of each walk; `None` when the walk did
    /// not go below its starting level within `max_len` steps.
    pub epochs: Vec<Option<u64>>,
    /// `(n, P(theta_1 > n))` for dyadic `n <= max_len`.
    pub tail: Vec<(u64, f64)>,
}

impl LadderStats {
    pub fn censored_fraction(&self) -> f64 {
        self.epochs.iter().filter(|e| e.is_none()).count() as f64 / self.epochs.len() as f64
    }

    /// Median epoch, `None` if at least half of the walks were censored.
    pub fn median(&self) -> Option<u64> {
        let mut v: Vec<u64> = self.epochs.iter().map(|e| e.unwrap_or(u64::MAX)).collect();
        v.sort_unstable();
        let m = v[(v.len() - 1) / 2];
        (m != u64::MAX).then_some(m)
    }
}

/// First descending ladder epochs of the random walk `M_k = ln(A_1 ... A_k)`.
/// Only meaningful when `kappa <= 0` (`beta <= 0`).
pub fn ladder_stats(params: &ModelParams, n_walks: u64, max_len: u64, seed: u64, workers: usize) -> Result<LadderStats> {
    params.ensure_valid()?;
    let kappa = params.kappa();
    if kappa > 0.0 {
        return Err(RuinError::InvalidRegime(format!(
            "ladder statistics need beta <= 0, got kappa = {kappa} > 0"
        )));
    }
    if n_walks == 0 || max_len == 0 {
        return Err(RuinError::InvalidArgument("n_walks and max_len must be >= 1".into()));
    }
    let sigma = params.sigma;
    let gamma = match params.interarrival {
        Interarrival::RenewalGamma { shape, scale } => Some(
            Gamma::new(shape, scale).map_err(|e| RuinError::InvalidArgument(format!("gamma interarrival: {e}")))?,
        ),
        Interarrival::PoissonExponential => None,
    };
    let mean_dt = 1.0 / params.alpha();
    let epochs = with_workers(workers, || {
        (0..n_walks)
            .into_par_iter()
            .map(|i| {
                let mut rng = PathRng::new(seed, i);
                let mut m = 0.0;
                for k in 1..=max_len {
                    let dt = match &gamma {
                        Some(g) => rng.sample(g),
                        None => mean_dt * rng.sample::<f64, _>(Exp1),
                    };
                    m += if sigma > 0.0 {
                        kappa * dt + sigma * dt.sqrt() * rng.sample::<f64, _>(StandardNormal)
                    } else {
                        kappa * dt
                    };
                    if m < 0.0 {
                        return Some(k);
                    }
                }
                None
            })
            .collect::<Vec<_>>()
    })?;
    let mut tail = Vec::new();
    let mut n = 1u64;
    while n <= max_len {
        let survivors = epochs.iter().filter(|e| e.is_none_or(|k| k > n)).count();
        tail.push((n, survivors as f64 / n_walks as f64));
        n *= 2;
    }
    Ok(LadderStats { max_len, epochs, tail })
}

/// Draws of `(A_k, J_k, xi_k)` for `n` steps of the embedded chain from one
/// stream; handy for checking the recursion against the closed form.
pub fn sample_chain_coefficients(params: &ModelParams, n: usize, nsub: usize, rng: &mut PathRng) -> Result<Vec<(f64, f64, f64)>> {
    let sim = ReserveSimulator::new(params, nsub)?;
    Ok((0..n)
        .map(|_| {
            let (step, xi) = sim.sample_coefficients(rng);
            (step.a, step.j, xi)
        })
        .collect())
}
