//! Survival probability for exponential jumps from the integro-differential
//! equation
//!
//! ```text
//! ½σ²u²Φ'' + (au + c)Φ' − (α₁+α₂)Φ + (α₁/μ₁)I₁ + (α₂/μ₂)I₂ = 0,
//! I₁(u) = ∫_{−∞}^u Φ(z) e^{−(u−z)/μ₁} dz,   I₂(u) = ∫_u^∞ Φ(z) e^{−(z−u)/μ₂} dz,
//! ```
//!
//! with `Φ = 0` on `]−∞, 0]`.
//!
//! The solve works with the ruin probability `Ψ = 1 − Φ` and the truncated
//! convolutions `J₁ = ∫_0^u Ψ e^{−(u−z)/μ₁}`, `J₂ = ∫_u^∞ Ψ e^{−(z−u)/μ₂}`, for
//! which the equation becomes the linear first-order system
//!
//! ```text
//! Ψ'' = 2/(σ²u²) [−(au + c)Ψ' + αΨ − (α₁/μ₁)J₁ − (α₂/μ₂)J₂ − α₁e^{−u/μ₁}],
//! J₁' = Ψ − J₁/μ₁,   J₂' = −Ψ + J₂/μ₂.
//! ```
//!
//! Working with `Ψ` keeps full relative precision in the power-law tail,
//! where `Φ` is within `1e−6` of one. `Φ`, `G = Φ'`, `I₁ = μ₁(1 − e^{−u/μ₁}) − J₁`
//! and `I₂ = μ₂ − J₂` are recovered at the end.

use serde::{Deserialize, Serialize};

use crate::error::{Result, RuinError};
use crate::model::{Interarrival, IssueCode, ModelParams};
use crate::numerics::{fd_weights, geometric_grid, solve_box_bvp, BoundaryRow};

/// Coefficients of the third-order equation `G''' + q₂G'' + q₁G' + q₀G = 0`
/// for `G = Φ'`, together with the unnormalized `g̃₀..g̃₃` (`qⱼ = g̃ⱼ/g̃₃`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdeCoeffs {
    pub u: f64,
    pub q0: f64,
    pub q1: f64,
    pub q2: f64,
    pub g_tilde: [f64; 4],
}

fn require_solver_params(params: &ModelParams) -> Result<()> {
    params.ensure_valid()?;
    if !(params.sigma > 0.0) {
        return Err(RuinError::InvalidArgument(
            "sigma must be positive outside the simulator".into(),
        ));
    }
    if params.interarrival != Interarrival::PoissonExponential {
        return Err(RuinError::InvalidArgument(
            "the equation holds for Poisson arrivals only".into(),
        ));
    }
    Ok(())
}

pub fn ode_coefficients(params: &ModelParams, u: f64) -> Result<OdeCoeffs> {
    require_solver_params(params)?;
    if !(u > 0.0) || !u.is_finite() {
        return Err(RuinError::InvalidArgument(format!("u = {u}: coefficients are singular at u <= 0")));
    }
    Ok(coefficients_unchecked(params, u))
}

pub(crate) fn coefficients_unchecked(p: &ModelParams, u: f64) -> OdeCoeffs {
    let s2 = p.sigma * p.sigma;
    let (a, c, alpha) = (p.a, p.c, p.alpha());
    let dmu = p.mu2 - p.mu1;
    let m2 = p.mu1 * p.mu2;
    let cross = p.alpha1 * p.mu2 - p.alpha2 * p.mu1;
    let q2 = dmu / m2 + 2.0 * (a + 2.0 * s2) / (s2 * u) + 2.0 * c / (s2 * u * u);
    let q1 = -1.0 / m2
        + 2.0 * (a + s2) * dmu / (s2 * m2 * u)
        + 2.0 * (dmu * c + m2 * (2.0 * a + s2 - alpha)) / (m2 * s2 * u * u);
    let q0 = -2.0 * a / (m2 * s2 * u) + 2.0 * (dmu * (a - alpha) + cross - c) / (m2 * s2 * u * u);
    let g3 = 0.5 * s2 * m2 * u * u;
    let g2 = m2 * ((a + 2.0 * s2) * u + c) + 0.5 * dmu * s2 * u * u;
    let g1 = m2 * (2.0 * a + s2 - alpha) + dmu * (s2 * u + a * u + c) - 0.5 * s2 * u * u;
    let g0 = -a * u - c + dmu * (a - alpha) + cross;
    OdeCoeffs {
        u,
        q0,
        q1,
        q2,
        g_tilde: [g0, g1, g2, g3],
    }
}

/// Condition imposed at the left end of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LeftBc {
    /// `Regular` when `c >= 0`, `Absorbing` when `c < 0`.
    #[default]
    Auto,
    /// `Φ(u_min) = 0`.
    Absorbing,
    /// The equation at `u_min` with the vanishing diffusion term dropped.
    /// Selects the solution with bounded `Φ'` at the origin; for `c = 0` it
    /// reduces to `Φ(0) = (α₂/μ₂) I₂(0) / (α₁ + α₂)`.
    Regular,
}

impl LeftBc {
    pub fn resolve(self, params: &ModelParams) -> LeftBc {
        match self {
            LeftBc::Auto if params.c < 0.0 => LeftBc::Absorbing,
            LeftBc::Auto => LeftBc::Regular,
            other => other,
        }
    }
}

/// How the ruin probability beyond `u_max` is closed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum TailPolicy {
    /// `Ψ(u_max)` continues the power law `u^{−β}` from `u_max / 10`.
    #[default]
    SelfConsistent,
    /// `Ψ(u_max) = k · u_max^{−β}`.
    Fixed { k: f64 },
    /// `Ψ(u_max) = 0`.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    /// Defaults to `1e−3 · min(μ₁, μ₂)`.
    pub u_min: Option<f64>,
    /// Defaults to `1e6 · max(μ₁, μ₂)`.
    pub u_max: Option<f64>,
    /// Number of geometrically spaced grid points.
    pub n_points: usize,
    pub left_bc: LeftBc,
    pub tail: TailPolicy,
    /// Largest accepted `max |IDE residual| / (α₁ + α₂)`; `None` disables
    /// the check.
    pub residual_tol: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            u_min: None,
            u_max: None,
            n_points: 8193,
            left_bc: LeftBc::Auto,
            tail: TailPolicy::SelfConsistent,
            residual_tol: Some(1e-3),
        }
    }
}

impl SolveOptions {
    pub fn range(&self, params: &ModelParams) -> (f64, f64) {
        (
            self.u_min.unwrap_or(1e-3 * params.mu1.min(params.mu2)),
            self.u_max.unwrap_or(1e6 * params.mu1.max(params.mu2)),
        )
    }

    /// The same problem on a grid with half the step.
    pub fn refined(&self) -> SolveOptions {
        SolveOptions {
            n_points: 2 * self.n_points - 1,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSolution {
    pub u: Vec<f64>,
    pub phi: Vec<f64>,
    /// `1 − Φ`, computed directly rather than by subtraction.
    pub psi: Vec<f64>,
    pub g: Vec<f64>,
    pub i1: Vec<f64>,
    pub i2: Vec<f64>,
    pub residual_ide: Vec<f64>,
    pub residual_ode3: Vec<f64>,
    pub left_bc: LeftBc,
    /// `Ψ(u_max)`.
    pub tail: f64,
}

impl GridSolution {
    /// `max |IDE residual| / (α₁ + α₂)`.
    pub fn max_scaled_residual(&self, params: &ModelParams) -> f64 {
        self.residual_ide.iter().fold(0.0f64, |m, r| m.max(r.abs())) / params.alpha()
    }

    /// Ruin probability at `u` by linear interpolation in `ln u`.
    pub fn psi_at(&self, u: f64) -> Option<f64> {
        let k = self.u.partition_point(|&x| x < u);
        if k == 0 {
            return (u == self.u[0]).then(|| self.psi[0]);
        }
        if k == self.u.len() {
            return None;
        }
        let (u0, u1) = (self.u[k - 1], self.u[k]);
        let w = (u / u0).ln() / (u1 / u0).ln();
        Some(self.psi[k - 1] * (1.0 - w) + self.psi[k] * w)
    }
}

pub fn solve_survival(params: &ModelParams, opts: &SolveOptions) -> Result<GridSolution> {
    require_solver_params(params)?;
    let beta = params.derive()?.beta;
    if beta <= 0.0 {
        return Err(RuinError::InvalidRegime(format!(
            "beta = {beta} <= 0: ruin is certain, there is no survival probability to solve for"
        )));
    }
    if params.validate().has(IssueCode::NoRuinPossible) {
        return Err(RuinError::InvalidRegime(
            "NO_RUIN_POSSIBLE: the ruin probability is identically zero".into(),
        ));
    }
    let (u_min, u_max) = opts.range(params);
    if !(u_min > 0.0 && u_max > u_min) || opts.n_points < 5 {
        return Err(RuinError::InvalidArgument(format!(
            "need 0 < u_min < u_max and at least 5 points (got [{u_min}, {u_max}], {})",
            opts.n_points
        )));
    }
    let grid = geometric_grid(u_min, u_max, opts.n_points);
    let n = grid.len();
    let left_bc = opts.left_bc.resolve(params);

    let p = *params;
    let s2 = p.sigma * p.sigma;
    let (k1, k2) = (p.alpha1 / p.mu1, p.alpha2 / p.mu2);
    let matrix_at = move |u: f64| {
        let k = 2.0 / (s2 * u * u);
        vec![
            0.0, 1.0, 0.0, 0.0,
            k * p.alpha(), -k * (p.a * u + p.c), -k * k1, -k * k2,
            1.0, 0.0, -1.0 / p.mu1, 0.0,
            -1.0, 0.0, 0.0, 1.0 / p.mu2,
        ]
    };
    let forcing: Vec<Vec<f64>> = grid
        .iter()
        .map(|&u| vec![0.0, -2.0 * p.alpha1 * (-u / p.mu1).exp() / (s2 * u * u), 0.0, 0.0])
        .collect();
    let no_forcing = vec![vec![0.0; 4]; n];

    // Right-hand side 0 carries the inhomogeneities with Ψ(u_max) = 0,
    // right-hand side 1 is the response to Ψ(u_max) = 1.
    let u0 = grid[0];
    // J₁(u_0) = μ₁(1 − e^{−u_0/μ₁}) Ψ(u_0): Ψ is flat on ]0, u_0].
    let mut left = vec![BoundaryRow {
        coeffs: vec![p.mu1 * (-u0 / p.mu1).exp_m1(), 0.0, 1.0, 0.0],
        values: vec![0.0, 0.0],
    }];
    left.push(match left_bc {
        LeftBc::Absorbing => BoundaryRow {
            coeffs: vec![1.0, 0.0, 0.0, 0.0],
            values: vec![1.0, 0.0],
        },
        _ => BoundaryRow {
            coeffs: vec![-p.alpha(), p.a * u0 + p.c, k1, k2],
            values: vec![-p.alpha1 * (-u0 / p.mu1).exp(), 0.0],
        },
    });
    let right = vec![
        BoundaryRow {
            coeffs: vec![1.0, 0.0, 0.0, 0.0],
            values: vec![0.0, 1.0],
        },
        BoundaryRow {
            coeffs: vec![-p.mu2, 0.0, 0.0, 1.0],
            values: vec![0.0, 0.0],
        },
    ];
    let y = solve_box_bvp(&grid, 4, matrix_at, &[forcing, no_forcing], &left, &right)?;

    let tail = match opts.tail {
        TailPolicy::Zero => 0.0,
        TailPolicy::Fixed { k } => k * u_max.powf(-beta),
        TailPolicy::SelfConsistent => {
            let target = u_max / 10.0;
            let w = grid.partition_point(|&u| u < target).min(n - 2);
            let rho = (grid[w] / u_max).powf(beta);
            let denom = 1.0 - rho * y[1][w][0];
            if !(denom.abs() > 1e-12) {
                return Err(RuinError::NonConverged("degenerate tail closure".into()));
            }
            rho * y[0][w][0] / denom
        }
    };

    let mut sol = GridSolution {
        u: grid.clone(),
        phi: Vec::with_capacity(n),
        psi: Vec::with_capacity(n),
        g: Vec::with_capacity(n),
        i1: Vec::with_capacity(n),
        i2: Vec::with_capacity(n),
        residual_ide: Vec::new(),
        residual_ode3: Vec::new(),
        left_bc,
        tail,
    };
    for (i, &u) in grid.iter().enumerate() {
        let s: Vec<f64> = (0..4).map(|j| y[0][i][j] + tail * y[1][i][j]).collect();
        sol.psi.push(s[0]);
        sol.phi.push(1.0 - s[0]);
        sol.g.push(-s[1]);
        sol.i1.push(-p.mu1 * (-u / p.mu1).exp_m1() - s[2]);
        sol.i2.push(p.mu2 - s[3]);
    }
    sol.residual_ide = ide_residual(params, &sol.u, &sol.phi, ResidualSeeds::default())?;
    sol.residual_ode3 = ode3_residual(params, &sol.u, &sol.g)?;

    if let Some(tol) = opts.residual_tol {
        let r = sol.max_scaled_residual(params);
        if !(r <= tol) {
            return Err(RuinError::NonConverged(format!(
                "max |IDE residual| / alpha = {r:e} exceeds {tol:e}"
            )));
        }
    }
    Ok(sol)
}

/// Starting values for the convolution recurrences in [`ide_residual`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ResidualSeeds {
    /// `I₁(u_0)`; defaults to `Φ(u_0) μ₁ (1 − e^{−u_0/μ₁})`, i.e. `Φ` constant
    /// on `]0, u_0]` and zero below.
    pub i1_left: Option<f64>,
    /// `I₂(u_max)`; defaults to `μ₂ Φ(u_max)`.
    pub i2_right: Option<f64>,
}

/// Exponential-kernel weights of `∫_0^h e^{−(h−s)/μ} f(s) ds` for `f` linear
/// between `f(0)` and `f(h)`: returns `(weight of f(0), weight of f(h))`.
fn kernel_weights(h: f64, mu: f64) -> (f64, f64) {
    let x = h / mu;
    let one_minus_e = -(-x).exp_m1();
    let w_far = if x < 1e-4 {
        mu * x * (0.5 - x * (1.0 / 3.0 - x / 8.0))
    } else {
        mu * (one_minus_e / x - (-x).exp())
    };
    (w_far, mu * one_minus_e - w_far)
}

/// Convolution integrals `(I₁, I₂)` of tabulated `Φ`, treating `Φ` as
/// piecewise linear and integrating the exponential kernel exactly.
pub fn convolutions(params: &ModelParams, u: &[f64], phi: &[f64], seeds: ResidualSeeds) -> (Vec<f64>, Vec<f64>) {
    let n = u.len();
    let (mu1, mu2) = (params.mu1, params.mu2);
    let mut i1 = vec![0.0; n];
    let mut i2 = vec![0.0; n];
    i1[0] = seeds
        .i1_left
        .unwrap_or_else(|| phi[0] * -mu1 * (-u[0] / mu1).exp_m1());
    for k in 0..n - 1 {
        let h = u[k + 1] - u[k];
        let (w_far, w_near) = kernel_weights(h, mu1);
        i1[k + 1] = (-h / mu1).exp() * i1[k] + w_far * phi[k] + w_near * phi[k + 1];
    }
    i2[n - 1] = seeds.i2_right.unwrap_or(mu2 * phi[n - 1]);
    for k in (0..n - 1).rev() {
        let h = u[k + 1] - u[k];
        let (w_far, w_near) = kernel_weights(h, mu2);
        i2[k] = (-h / mu2).exp() * i2[k + 1] + w_far * phi[k + 1] + w_near * phi[k];
    }
    (i1, i2)
}

fn check_grid(u: &[f64], min_len: usize) -> Result<()> {
    if u.len() < min_len {
        return Err(RuinError::InvalidArgument(format!("need at least {min_len} grid points")));
    }
    if let Some(i) = (1..u.len()).find(|&i| !(u[i] > u[i - 1])) {
        return Err(RuinError::NonMonotoneGrid(i));
    }
    if !(u[0] > 0.0) {
        return Err(RuinError::InvalidArgument("grid must be positive".into()));
    }
    Ok(())
}

/// Pointwise residual `ℒΦ + (α₁/μ₁)I₁ + (α₂/μ₂)I₂` of tabulated `Φ`, with
/// three-point differences and the convolutions of [`convolutions`]. The
/// discretization is independent of the one used by [`solve_survival`].
pub fn ide_residual(params: &ModelParams, u: &[f64], phi: &[f64], seeds: ResidualSeeds) -> Result<Vec<f64>> {
    check_grid(u, 5)?;
    if phi.len() != u.len() {
        return Err(RuinError::InvalidArgument("phi and grid lengths differ".into()));
    }
    let (i1, i2) = convolutions(params, u, phi, seeds);
    let n = u.len();
    let s2 = params.sigma * params.sigma;
    Ok((0..n)
        .map(|k| {
            let start = k.saturating_sub(1).min(n - 3);
            let w = fd_weights(u[k], &u[start..start + 3], 2);
            let d = |m: usize| -> f64 { (0..3).map(|j| w[m][j] * phi[start + j]).sum() };
            0.5 * s2 * u[k] * u[k] * d(2) + (params.a * u[k] + params.c) * d(1) - params.alpha() * phi[k]
                + params.alpha1 / params.mu1 * i1[k]
                + params.alpha2 / params.mu2 * i2[k]
        })
        .collect())
}

/// Pointwise residual `Σ g̃ⱼ G^{(j)}` of tabulated `G` in the third-order
/// equation, with five-point differences.
pub fn ode3_residual(params: &ModelParams, u: &[f64], g: &[f64]) -> Result<Vec<f64>> {
    check_grid(u, 5)?;
    let n = u.len();
    Ok((0..n)
        .map(|k| {
            let start = k.saturating_sub(2).min(n - 5);
            let w = fd_weights(u[k], &u[start..start + 5], 3);
            let gt = coefficients_unchecked(params, u[k]).g_tilde;
            (0..4)
                .map(|m| gt[m] * (0..5).map(|j| w[m][j] * g[start + j]).sum::<f64>())
                .sum()
        })
        .collect())
}
