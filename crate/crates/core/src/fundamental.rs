//! Fundamental solutions of the third-order equation for `G = Φ'` on a
//! finite range `[u_lo, u_max]` in the asymptotic regime.
//!
//! * `h₁ ~ e^{u/μ₂}` dominates for increasing `u` and is integrated forward;
//! * `h₂ ~ e^{−u/μ₁}` dominates for decreasing `u` and is integrated backward;
//! * `h₃ ~ u^{−2a/σ²}` dominates in neither direction. It is computed as a
//!   boundary value problem that excludes `h₂` at `u_lo` and `h₁` at `u_max`.
//!
//! `H₂` and `H₃` are the integrals from `u` to infinity, with the part beyond
//! `u_max` taken from the asymptotic form of each solution.

use serde::Serialize;

use crate::asymptotics::track_roots;
use crate::error::{Result, RuinError};
use crate::model::ModelParams;
use crate::numerics::{geometric_grid, integrate_linear_dp45, solve_box_bvp, BoundaryRow};
use crate::solver::{coefficients_unchecked, ode_coefficients};

/// Column stored as `mantissa[i] · exp(log_scale[i])`, for solutions whose
/// magnitude spans more than the floating-point range.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaledColumn {
    pub mantissa: Vec<f64>,
    pub log_scale: Vec<f64>,
}

impl ScaledColumn {
    pub fn value(&self, i: usize) -> f64 {
        self.mantissa[i] * self.log_scale[i].exp()
    }

    pub fn ln_abs(&self, i: usize) -> f64 {
        self.mantissa[i].abs().ln() + self.log_scale[i]
    }

    fn rescaled(mut self, ln_norm: f64) -> Self {
        for s in self.log_scale.iter_mut() {
            *s -= ln_norm;
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FundamentalSolutions {
    pub u: Vec<f64>,
    /// Normalized by `h₁(u_max) = 1`.
    pub h1: ScaledColumn,
    /// Normalized by `h₂(u_lo) = 1`.
    pub h2: ScaledColumn,
    /// Normalized by `h₃(u_max) = u_max^{−2a/σ²}`.
    pub h3: Vec<f64>,
    pub big_h2: ScaledColumn,
    pub big_h3: Vec<f64>,
}

/// Left eigenvector `w` of the companion matrix for the real root `λ`, so
/// that `wᵀy` measures the `λ` component of `y = (G, G', G'')`.
fn left_eigenvector(q1: f64, q2: f64, lambda: f64) -> [f64; 3] {
    [lambda * lambda + q2 * lambda + q1, lambda + q2, 1.0]
}

fn companion_rhs(params: ModelParams) -> impl Fn(f64, &[f64; 4]) -> [f64; 4] {
    move |u, y| {
        let c = coefficients_unchecked(&params, u);
        [y[1], y[2], -c.q0 * y[0] - c.q1 * y[1] - c.q2 * y[2], -y[0]]
    }
}

pub fn fundamental_solutions(params: &ModelParams, u_lo: f64, u_max: f64, n_points: usize) -> Result<FundamentalSolutions> {
    let beta = params.derive()?.beta;
    ode_coefficients(params, u_lo)?;
    if beta <= 0.0 {
        return Err(RuinError::InvalidRegime(format!("beta = {beta} <= 0: no power-law mode")));
    }
    if !(u_max > u_lo) || n_points < 3 {
        return Err(RuinError::InvalidArgument("need u_lo < u_max and at least 3 points".into()));
    }
    let grid = geometric_grid(u_lo, u_max, n_points);
    let n = grid.len();
    let roots = track_roots(params, &[u_lo, u_max])?;
    let real = |k: usize, i: usize| -> Result<f64> {
        let l = roots[i].lambda[k];
        if l.im.abs() > 1e-12 * l.norm() {
            return Err(RuinError::NonConverged(format!(
                "root {} is complex at u = {:e}; move the range further out",
                k + 1,
                roots[i].u
            )));
        }
        Ok(l.re)
    };
    let rtol = 1e-10;

    // h₁ forward from u_lo.
    let l1 = real(0, 0)?;
    let tr = integrate_linear_dp45(companion_rhs(*params), [1.0, l1, l1 * l1, 0.0], &grid, rtol)?;
    let h1 = ScaledColumn {
        mantissa: tr.states.iter().map(|s| s[0]).collect(),
        log_scale: tr.log_scale.clone(),
    };
    let h1 = {
        let ln_end = h1.ln_abs(n - 1);
        let sign = h1.mantissa[n - 1].signum();
        let mut h = h1.rescaled(ln_end);
        h.mantissa.iter_mut().for_each(|m| *m *= sign);
        h
    };

    // h₂ backward from u_max, with H₂(u_max) = h₂(u_max)/|λ₂|.
    let l2 = real(1, 1)?;
    let back: Vec<f64> = grid.iter().rev().copied().collect();
    let tr = integrate_linear_dp45(companion_rhs(*params), [1.0, l2, l2 * l2, -1.0 / l2], &back, rtol)?;
    let rev = |col: usize| ScaledColumn {
        mantissa: tr.states.iter().rev().map(|s| s[col]).collect(),
        log_scale: tr.log_scale.iter().rev().copied().collect(),
    };
    let (h2, big_h2) = (rev(0), rev(3));
    let ln0 = h2.ln_abs(0);
    let sign = h2.mantissa[0].signum();
    let fix = |c: ScaledColumn| {
        let mut c = c.rescaled(ln0);
        c.mantissa.iter_mut().for_each(|m| *m *= sign);
        c
    };
    let (h2, big_h2) = (fix(h2), fix(big_h2));

    // h₃ as a boundary value problem.
    let p = *params;
    let matrix_at = move |u: f64| {
        let c = coefficients_unchecked(&p, u);
        vec![
            0.0, 1.0, 0.0, 0.0,
            0.0, 0.0, 1.0, 0.0,
            -c.q0, -c.q1, -c.q2, 0.0,
            -1.0, 0.0, 0.0, 0.0,
        ]
    };
    let c_lo = coefficients_unchecked(params, u_lo);
    let c_hi = coefficients_unchecked(params, u_max);
    let w2 = left_eigenvector(c_lo.q1, c_lo.q2, real(1, 0)?);
    let w1 = left_eigenvector(c_hi.q1, c_hi.q2, real(0, 1)?);
    let power = 2.0 * params.a / (params.sigma * params.sigma);
    let h3_end = u_max.powf(-power);
    let left = [BoundaryRow {
        coeffs: vec![w2[0], w2[1], w2[2], 0.0],
        values: vec![0.0],
    }];
    let right = [
        BoundaryRow {
            coeffs: vec![w1[0], w1[1], w1[2], 0.0],
            values: vec![0.0],
        },
        BoundaryRow {
            coeffs: vec![1.0, 0.0, 0.0, 0.0],
            values: vec![h3_end],
        },
        BoundaryRow {
            coeffs: vec![0.0, 0.0, 0.0, 1.0],
            values: vec![h3_end * u_max / (power - 1.0)],
        },
    ];
    let y = solve_box_bvp(&grid, 4, matrix_at, &[vec![vec![0.0; 4]; n]], &left, &right)?;
    let h3 = y[0].iter().map(|s| s[0]).collect();
    let big_h3 = y[0].iter().map(|s| s[3]).collect();

    Ok(FundamentalSolutions {
        u: grid,
        h1,
        h2,
        h3,
        big_h2,
        big_h3,
    })
}
