//! Simulation of the reserve process through its embedded chain.
//!
//! At the jump instants `T_n` the reserve satisfies
//!
//! ```text
//! X_n = A_n X_{n-1} + c J_n + xi_n,
//! A_n = exp(eta_{T_n} - eta_{T_{n-1}}),
//! J_n = int_{T_{n-1}}^{T_n} exp(eta_{T_n} - eta_v) dv,
//! ```
//!
//! with `eta_t = kappa t + sigma W_t`. `A_n` is sampled exactly; `J_n` is a
//! trapezoid sum over a Brownian bridge pinned to the sampled endpoint.
//!
//! Between jumps the reserve is `S_t (x + c int_0^t S_v^{-1} dv)`, whose sign
//! is monotone in `t`, so ruin inside an interjump interval happens iff the
//! pre-jump value `A x + c J` is non-positive.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RuinError};
use crate::model::{Interarrival, ModelParams};

pub const DEFAULT_NSUB: usize = 64;

/// One interjump Brownian functional pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbmStepSample {
    pub dt: f64,
    /// Growth factor of the asset over the interval.
    pub a: f64,
    /// Discounted-time functional `int_0^dt exp(eta_dt - eta_v) dv`.
    pub j: f64,
    pub nsub: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathStatus {
    Ruined,
    SurvivedToBarrier,
    Censored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RuinKind {
    AtJump,
    BetweenJumps,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOutcome {
    pub status: PathStatus,
    /// Ruin time. For ruin between jumps this is the end of the interjump
    /// interval in which the reserve crossed zero.
    pub tau: Option<f64>,
    pub n_jumps: u64,
    pub x_final: f64,
    pub ruin_kind: Option<RuinKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Horizon {
    pub max_jumps: u64,
    #[serde(default)]
    pub max_time: Option<f64>,
    #[serde(default)]
    pub upper_barrier: Option<f64>,
}

impl Default for Horizon {
    fn default() -> Self {
        Horizon {
            max_jumps: 10_000,
            max_time: None,
            upper_barrier: None,
        }
    }
}

/// Streams the sequential Brownian-bridge construction of `W` on
/// `nsub + 1` equally spaced points of `[0, dt]`, conditioned on `W_dt`.
/// Calls `visit(k, w_k)` for `k = 1..nsub-1` and returns `W_dt`.
#[inline]
fn bridge_walk<R: Rng + ?Sized>(
    dt: f64,
    nsub: usize,
    rng: &mut R,
    mut visit: impl FnMut(usize, f64),
) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    let w_end = dt.sqrt() * z;
    let delta = dt / nsub as f64;
    let mut w = 0.0;
    for k in 1..nsub {
        let remaining = dt - (k - 1) as f64 * delta;
        let mean = w + (w_end - w) * delta / remaining;
        let var = delta * (remaining - delta) / remaining;
        let z: f64 = rng.sample(StandardNormal);
        w = mean + var.max(0.0).sqrt() * z;
        visit(k, w);
    }
    w_end
}

/// Samples `(A, J)` for an interjump interval of length `dt`.
///
/// `ln A ~ N(kappa dt, sigma^2 dt)` exactly. With `sigma = 0` both `A` and
/// `J` are the closed-form deterministic values and no randomness is drawn.
pub fn sample_gbm_step<R: Rng + ?Sized>(
    kappa: f64,
    sigma: f64,
    dt: f64,
    nsub: usize,
    rng: &mut R,
) -> GbmStepSample {
    debug_assert!(dt >= 0.0 && nsub >= 1);
    if sigma == 0.0 || dt == 0.0 {
        let growth = kappa * dt;
        let j = if kappa == 0.0 {
            dt
        } else {
            growth.exp_m1() / kappa
        };
        return GbmStepSample {
            dt,
            a: growth.exp(),
            j,
            nsub,
        };
    }
    // Draws are ordered (W_dt, W_1, ..., W_{nsub-1}) to match GbmBridge::sample.
    let mut sum = 0.0;
    let delta = dt / nsub as f64;
    let w_end = bridge_walk(dt, nsub, rng, |k, w| {
        sum += (-(kappa * k as f64 * delta + sigma * w)).exp();
    });
    let a = (kappa * dt + sigma * w_end).exp();
    // Interior terms were accumulated as exp(-eta_k); endpoints have weight 1/2.
    let j = delta * (a * (sum + 0.5) + 0.5);
    GbmStepSample { dt, a, j, nsub }
}

/// Signed jump: `+Exp(mean mu2)` with probability `alpha2 / alpha`, otherwise
/// `-Exp(mean mu1)`.
pub fn sample_jump<R: Rng + ?Sized>(alpha1: f64, alpha2: f64, mu1: f64, mu2: f64, rng: &mut R) -> f64 {
    let up = rng.random::<f64>() * (alpha1 + alpha2) < alpha2;
    let e: f64 = rng.sample(Exp1);
    if up {
        mu2 * e
    } else {
        -mu1 * e
    }
}

/// Advances the embedded chain over one interjump interval. Returns the
/// reserve just before the jump and just after it.
#[inline]
pub fn step_embedded(x_prev: f64, step: &GbmStepSample, xi: f64, c: f64) -> (f64, f64) {
    let x_pre = step.a * x_prev + c * step.j;
    (x_pre, x_pre + xi)
}

/// Closed product-sum form of the embedded chain,
/// `X_n = E_n u + sum_k B_k E_n / E_k` with `E_n = A_1 ... A_n` and
/// `B_k = xi_k + c J_k`, evaluated with the products in log space.
///
/// Each sample is `(A_k, J_k, xi_k)`. Used as an oracle for the recursion.
pub fn embedded_chain_direct(params: &ModelParams, u: f64, samples: &[(f64, f64, f64)]) -> Result<Vec<f64>> {
    if let Some(k) = samples.iter().position(|s| !(s.0 > 0.0)) {
        return Err(RuinError::InvalidArgument(format!(
            "A_{} = {} must be positive",
            k + 1,
            samples[k].0
        )));
    }
    let log_e: Vec<f64> = samples
        .iter()
        .scan(0.0, |acc, s| {
            *acc += s.0.ln();
            Some(*acc)
        })
        .collect();
    let out = (0..samples.len())
        .map(|n| {
            let mut x = u * log_e[n].exp();
            for k in 0..=n {
                let b = samples[k].2 + params.c * samples[k].1;
                x += b * (log_e[n] - log_e[k]).exp();
            }
            x
        })
        .collect();
    Ok(out)
}

/// Sampler for the interarrival law.
#[derive(Debug, Clone, Copy)]
enum Arrivals {
    Exponential { mean: f64 },
    Gamma(Gamma<f64>),
}

impl Arrivals {
    fn new(params: &ModelParams) -> Result<Self> {
        match params.interarrival {
            Interarrival::PoissonExponential => Ok(Arrivals::Exponential {
                mean: 1.0 / params.alpha(),
            }),
            Interarrival::RenewalGamma { shape, scale } => Gamma::new(shape, scale)
                .map(Arrivals::Gamma)
                .map_err(|e| RuinError::InvalidArgument(format!("gamma interarrival: {e}"))),
        }
    }

    #[inline]
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Arrivals::Exponential { mean } => mean * rng.sample::<f64, _>(Exp1),
            Arrivals::Gamma(g) => g.sample(rng),
        }
    }
}

/// Reusable simulator bound to one parameter set.
#[derive(Debug, Clone)]
pub struct ReserveSimulator {
    params: ModelParams,
    kappa: f64,
    nsub: usize,
    arrivals: Arrivals,
}

impl ReserveSimulator {
    pub fn new(params: &ModelParams, nsub: usize) -> Result<Self> {
        params.ensure_valid()?;
        if nsub == 0 {
            return Err(RuinError::InvalidArgument("nsub must be >= 1".into()));
        }
        Ok(ReserveSimulator {
            params: *params,
            kappa: params.kappa(),
            nsub,
            arrivals: Arrivals::new(params)?,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn nsub(&self) -> usize {
        self.nsub
    }

    pub fn sample_interarrival<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.arrivals.sample(rng)
    }

    /// Draws the coefficients `(A, J, xi)` of one step of the embedded chain,
    /// in the same order as `simulate` consumes them.
    pub fn sample_coefficients<R: Rng + ?Sized>(&self, rng: &mut R) -> (GbmStepSample, f64) {
        let p = &self.params;
        let dt = self.arrivals.sample(rng);
        let step = sample_gbm_step(self.kappa, p.sigma, dt, self.nsub, rng);
        let xi = sample_jump(p.alpha1, p.alpha2, p.mu1, p.mu2, rng);
        (step, xi)
    }

    pub fn simulate<R: Rng + ?Sized>(&self, u: f64, horizon: &Horizon, rng: &mut R) -> PathOutcome {
        let c = self.params.c;
        let mut x = u;
        let mut t = 0.0;
        let mut n = 0u64;
        loop {
            if n >= horizon.max_jumps {
                return censored(x, n);
            }
            let (step, xi) = self.sample_coefficients(rng);
            if let Some(t_max) = horizon.max_time {
                if t + step.dt > t_max {
                    return censored(x, n);
                }
            }
            t += step.dt;
            n += 1;
            let (x_pre, x_post) = step_embedded(x, &step, xi, c);
            if x_pre <= 0.0 {
                return PathOutcome {
                    status: PathStatus::Ruined,
                    tau: Some(t),
                    n_jumps: n,
                    x_final: x_pre,
                    ruin_kind: Some(RuinKind::BetweenJumps),
                };
            }
            if x_post <= 0.0 {
                return PathOutcome {
                    status: PathStatus::Ruined,
                    tau: Some(t),
                    n_jumps: n,
                    x_final: x_post,
                    ruin_kind: Some(RuinKind::AtJump),
                };
            }
            x = x_post;
            if let Some(barrier) = horizon.upper_barrier {
                if x >= barrier {
                    return PathOutcome {
                        status: PathStatus::SurvivedToBarrier,
                        tau: None,
                        n_jumps: n,
                        x_final: x,
                        ruin_kind: None,
                    };
                }
            }
        }
    }
}

fn censored(x: f64, n: u64) -> PathOutcome {
    PathOutcome {
        status: PathStatus::Censored,
        tau: None,
        n_jumps: n,
        x_final: x,
        ruin_kind: None,
    }
}

pub fn simulate_path<R: Rng + ?Sized>(
    params: &ModelParams,
    u: f64,
    horizon: &Horizon,
    nsub: usize,
    rng: &mut R,
) -> Result<PathOutcome> {
    if !(u > 0.0) {
        return Err(RuinError::InvalidArgument(format!("initial capital u = {u} must be > 0")));
    }
    Ok(ReserveSimulator::new(params, nsub)?.simulate(u, horizon, rng))
}

/// A stored Brownian bridge on an interjump interval. Produces the same
/// `(A, J)` as [`sample_gbm_step`] for the same stream, and can be refined by
/// midpoint insertion so that `J` can be compared across resolutions of one
/// underlying path.
#[derive(Debug, Clone)]
pub struct GbmBridge {
    pub kappa: f64,
    pub sigma: f64,
    pub dt: f64,
    /// `W` at the `nsub + 1` equally spaced points of `[0, dt]`.
    pub w: Vec<f64>,
}

impl GbmBridge {
    pub fn sample<R: Rng + ?Sized>(kappa: f64, sigma: f64, dt: f64, nsub: usize, rng: &mut R) -> Self {
        let mut w = vec![0.0; nsub + 1];
        let w_end = bridge_walk(dt, nsub, rng, |k, wk| w[k] = wk);
        w[nsub] = w_end;
        GbmBridge { kappa, sigma, dt, w }
    }

    pub fn nsub(&self) -> usize {
        self.w.len() - 1
    }

    fn eta(&self, k: usize) -> f64 {
        let v = self.dt * k as f64 / self.nsub() as f64;
        self.kappa * v + self.sigma * self.w[k]
    }

    /// Doubles the resolution by sampling the bridge at every midpoint.
    pub fn refine<R: Rng + ?Sized>(&self, rng: &mut R) -> Self {
        let half_var = 0.25 * self.dt / self.nsub() as f64;
        let mut w = Vec::with_capacity(2 * self.w.len() - 1);
        for pair in self.w.windows(2) {
            w.push(pair[0]);
            let z: f64 = rng.sample(StandardNormal);
            w.push(0.5 * (pair[0] + pair[1]) + half_var.sqrt() * z);
        }
        w.push(*self.w.last().unwrap());
        GbmBridge { w, ..*self }
    }

    pub fn step(&self) -> GbmStepSample {
        let n = self.nsub();
        let eta_end = self.eta(n);
        let delta = self.dt / n as f64;
        let inner: f64 = (1..n).map(|k| (-self.eta(k)).exp()).sum();
        let a = eta_end.exp();
        GbmStepSample {
            dt: self.dt,
            a,
            j: delta * (a * (inner + 0.5) + 0.5),
            nsub: n,
        }
    }

    /// Reserve `S_v (x + c int_0^v S_s^{-1} ds)` on the bridge points, with the
    /// integral taken by the cumulative trapezoid rule.
    pub fn reserve_path(&self, x: f64, c: f64) -> Vec<f64> {
        let n = self.nsub();
        let delta = self.dt / n as f64;
        let mut out = Vec::with_capacity(n + 1);
        let mut integral = 0.0;
        let mut prev = 1.0; // exp(-eta_0)
        out.push(x);
        for k in 1..=n {
            let eta = self.eta(k);
            let cur = (-eta).exp();
            integral += 0.5 * delta * (prev + cur);
            prev = cur;
            out.push(eta.exp() * (x + c * integral));
        }
        out
    }
}
