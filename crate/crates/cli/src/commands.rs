use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use ruinkit::asymptotics::{fit_power_law, theoretical_tail, track_roots, PowerLawFit};
use ruinkit::io::{
    read_curve, write_json, write_ladder_csv, write_mc_csv, write_mc_horizons_csv, write_roots_csv, write_solution_csv,
};
use ruinkit::mc::{
    auto_horizon, estimate_lower_bound, estimate_ruin_curve, estimate_ruin_horizons, ladder_stats, LowerBoundEstimate,
    MCEstimate, McSettings,
};
use ruinkit::path_sim::Horizon;
use ruinkit::solver::{solve_survival, LeftBc, SolveOptions, TailPolicy};
use ruinkit::{ModelParams, RuinError};
use serde::Serialize;

use crate::config::{section, RunConfig};
use crate::Failure;

pub struct Context {
    pub config: RunConfig,
    pub seed: u64,
    pub workers: usize,
    pub out: PathBuf,
}

impl Context {
    fn model(&self) -> &ModelParams {
        &self.config.model
    }

    fn settings(&self, n_paths: u64, nsub: Option<usize>) -> McSettings {
        let s = McSettings::new(n_paths, self.seed).with_workers(self.workers);
        match nsub {
            Some(k) => s.with_nsub(k),
            None => s,
        }
    }

    fn write_csv(&self, name: &str, write: impl FnOnce(BufWriter<File>) -> ruinkit::Result<()>) -> Result<(), Failure> {
        let file = File::create(self.out.join(name)).map_err(RuinError::from)?;
        Ok(write(BufWriter::new(file))?)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), Failure> {
        Ok(write_json(&self.out.join(name), value)?)
    }
}

#[derive(Serialize)]
struct HorizonEstimate<'a> {
    max_jumps: u64,
    #[serde(flatten)]
    estimate: &'a MCEstimate,
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    model: &'a ModelParams,
    seed: u64,
    horizon: Horizon,
    nsub: usize,
    estimates: Vec<HorizonEstimate<'a>>,
}

pub fn simulate(ctx: &Context) -> Result<String, Failure> {
    let sec = section(&ctx.config.simulate, "simulate", "simulate")?;
    let grid = sec.u.points()?;
    let u_top = grid.iter().copied().fold(0.0, f64::max);
    let horizon = match (sec.horizon, &sec.horizons) {
        (Some(h), _) => h,
        (None, Some(hs)) => Horizon {
            max_jumps: hs.iter().copied().max().unwrap_or(0),
            ..auto_horizon(ctx.model(), u_top)
        },
        (None, None) => auto_horizon(ctx.model(), u_top),
    };
    let horizons = sec.horizons.clone().unwrap_or_else(|| vec![horizon.max_jumps]);
    let settings = ctx.settings(sec.n_paths, sec.nsub);
    let mut rows = Vec::new();
    for &u in &grid {
        let ests = estimate_ruin_horizons(ctx.model(), u, &horizon, &horizons, &settings)?;
        rows.extend(horizons.iter().copied().zip(ests));
    }
    ctx.write_csv("simulate.csv", |w| write_mc_horizons_csv(w, &rows))?;
    ctx.write_json(
        "simulate.json",
        &SimulateSummary {
            model: ctx.model(),
            seed: ctx.seed,
            horizon,
            nsub: settings.nsub,
            estimates: rows.iter().map(|(h, e)| HorizonEstimate { max_jumps: *h, estimate: e }).collect(),
        },
    )?;
    let runtime: f64 = rows.iter().map(|r| r.1.runtime).sum();
    Ok(format!("simulate: {} estimates in {runtime:.2} s", rows.len()))
}

#[derive(Serialize)]
struct CurveSummary<'a> {
    model: &'a ModelParams,
    seed: u64,
    horizon: Horizon,
    nsub: usize,
    censored_points: Vec<f64>,
    estimates: &'a [MCEstimate],
}

pub fn curve(ctx: &Context) -> Result<String, Failure> {
    let sec = section(&ctx.config.curve, "curve", "curve")?;
    let grid = sec.u.points()?;
    let horizon = sec.horizon.unwrap_or_else(|| auto_horizon(ctx.model(), grid[grid.len() - 1]));
    let settings = ctx.settings(sec.n_paths, sec.nsub);
    let est = estimate_ruin_curve(ctx.model(), &grid, &horizon, &settings)?;
    ctx.write_csv("curve.csv", |w| write_mc_csv(w, &est))?;
    ctx.write_json(
        "curve.json",
        &CurveSummary {
            model: ctx.model(),
            seed: ctx.seed,
            horizon,
            nsub: settings.nsub,
            censored_points: est.iter().filter(|e| e.censoring_flag).map(|e| e.u).collect(),
            estimates: &est,
        },
    )?;
    let runtime: f64 = est.iter().map(|e| e.runtime).sum();
    Ok(format!("curve: {} points in {runtime:.2} s", est.len()))
}

#[derive(Serialize)]
struct SolveSummary<'a> {
    model: &'a ModelParams,
    beta: f64,
    options: &'a SolveOptions,
    u_min: f64,
    u_max: f64,
    n_points: usize,
    left_bc: LeftBc,
    tail_policy: TailPolicy,
    psi_at_u_max: f64,
    max_scaled_residual: f64,
}

pub fn solve(ctx: &Context) -> Result<String, Failure> {
    let opts = section(&ctx.config.solve, "solve", "solve")?;
    let sol = solve_survival(ctx.model(), opts)?;
    let residual = sol.max_scaled_residual(ctx.model());
    ctx.write_csv("solution.csv", |w| write_solution_csv(w, &sol))?;
    ctx.write_json(
        "solve.json",
        &SolveSummary {
            model: ctx.model(),
            beta: ctx.model().derive()?.beta,
            options: opts,
            u_min: sol.u[0],
            u_max: sol.u[sol.u.len() - 1],
            n_points: sol.u.len(),
            left_bc: sol.left_bc,
            tail_policy: opts.tail,
            psi_at_u_max: sol.tail,
            max_scaled_residual: residual,
        },
    )?;
    Ok(format!("solve: {} points, max scaled residual {residual:e}", sol.u.len()))
}

#[derive(Serialize)]
struct RootsSummary {
    n_points: usize,
    /// Points where a pair of roots is complex.
    complex_points: Vec<f64>,
    /// Points where roots nearly coincide and labels are unreliable.
    collision_points: Vec<f64>,
    min_gap: f64,
}

pub fn roots(ctx: &Context) -> Result<String, Failure> {
    let sec = section(&ctx.config.roots, "roots", "roots")?;
    let grid = sec.u.points()?;
    let roots = track_roots(ctx.model(), &grid)?;
    ctx.write_csv("roots.csv", |w| write_roots_csv(w, &roots))?;
    let summary = RootsSummary {
        n_points: roots.len(),
        complex_points: roots.iter().filter(|r| !r.is_real(1e-12)).map(|r| r.u).collect(),
        collision_points: roots.iter().filter(|r| r.collision).map(|r| r.u).collect(),
        min_gap: roots.iter().map(|r| r.min_gap).fold(f64::INFINITY, f64::min),
    };
    ctx.write_json("roots.json", &summary)?;
    Ok(format!(
        "roots: {} points, {} complex, {} collisions",
        summary.n_points,
        summary.complex_points.len(),
        summary.collision_points.len()
    ))
}

#[derive(Serialize)]
struct FitSummary {
    input: PathBuf,
    weighted: bool,
    /// Theoretical exponent, when defined.
    beta: Option<f64>,
    #[serde(flatten)]
    fit: PowerLawFit,
}

pub fn fit(ctx: &Context) -> Result<String, Failure> {
    let sec = section(&ctx.config.fit, "fit", "fit")?;
    let input = sec.input.clone().unwrap_or_else(|| ctx.out.join("solution.csv"));
    let file = File::open(&input)
        .map_err(|e| Failure::input(format!("INVALID_ARGUMENT: cannot open {}: {e}", input.display())))?;
    let curve = read_curve(file)?;
    let se = curve.stderr.as_deref().filter(|_| sec.weighted);
    let fit = fit_power_law(&curve.u, &curve.psi, se, sec.fit_range)?;
    let beta = theoretical_tail(ctx.model()).ok().map(|t| t.beta);
    ctx.write_json(
        "fit.json",
        &FitSummary {
            input,
            weighted: se.is_some(),
            beta,
            fit,
        },
    )?;
    Ok(format!("fit: beta_hat = {}, k_hat = {}", fit.beta_hat, fit.k_hat))
}

#[derive(Serialize)]
struct Check {
    name: &'static str,
    pass: bool,
    value: f64,
    threshold: f64,
}

#[derive(Serialize)]
struct AgreementPoint {
    u: f64,
    psi_solver: f64,
    p_hat: f64,
    stderr: f64,
    censored_fraction: f64,
    gap: f64,
    allowed: f64,
}

#[derive(Serialize)]
struct CrossvalReport<'a> {
    status: &'static str,
    model: &'a ModelParams,
    seed: u64,
    beta: f64,
    fit: PowerLawFit,
    checks: Vec<Check>,
    points: Vec<AgreementPoint>,
}

/// Solver, Monte Carlo and tail fit on one configuration. Writes the report
/// even when a check fails; the failure is then reported as exit status 1.
pub fn crossval(ctx: &Context) -> Result<String, Failure> {
    let sec = section(&ctx.config.crossval, "crossval", "crossval")?;
    let opts = section(&ctx.config.solve, "solve", "crossval")?;
    let p = ctx.model();
    let sol = solve_survival(p, opts)?;
    let beta = p.derive()?.beta;
    let grid = sec.u.points()?;
    let horizon = sec.horizon.unwrap_or_else(|| auto_horizon(p, grid[grid.len() - 1]));
    let est = estimate_ruin_curve(p, &grid, &horizon, &ctx.settings(sec.n_paths, sec.nsub))?;
    let fit = fit_power_law(&sol.u, &sol.psi, None, sec.fit_range)?;

    let mut points = Vec::new();
    for e in &est {
        let psi = sol
            .psi_at(e.u)
            .ok_or_else(|| Failure::input(format!("INVALID_ARGUMENT: u = {} lies outside the solver grid", e.u)))?;
        points.push(AgreementPoint {
            u: e.u,
            psi_solver: psi,
            p_hat: e.p_hat,
            stderr: e.stderr,
            censored_fraction: e.censored_fraction,
            gap: (psi - e.p_hat).abs(),
            allowed: sec.z * e.stderr + sec.slack,
        });
    }
    let worst_excess = points.iter().map(|q| q.gap - q.allowed).fold(f64::NEG_INFINITY, f64::max);
    let censored = points.iter().map(|q| q.censored_fraction).fold(0.0, f64::max);
    let residual = sol.max_scaled_residual(p);
    let beta_err = (fit.beta_hat - beta).abs() / beta;
    let checks = vec![
        Check {
            name: "mc_solver_agreement",
            pass: worst_excess <= 0.0,
            value: worst_excess,
            threshold: 0.0,
        },
        Check {
            name: "censored_fraction",
            pass: censored < sec.censor_tol,
            value: censored,
            threshold: sec.censor_tol,
        },
        Check {
            name: "ide_residual",
            pass: residual <= sec.residual_tol,
            value: residual,
            threshold: sec.residual_tol,
        },
        Check {
            name: "tail_exponent",
            pass: beta_err <= sec.beta_tol && fit.k_hat > 0.0,
            value: beta_err,
            threshold: sec.beta_tol,
        },
    ];
    let pass = checks.iter().all(|c| c.pass);
    let report = CrossvalReport {
        status: if pass { "PASS" } else { "FAIL" },
        model: p,
        seed: ctx.seed,
        beta,
        fit,
        checks,
        points,
    };
    ctx.write_json("crossval.json", &report)?;
    let mut lines = vec![format!("crossval: {}", report.status)];
    lines.extend(
        report
            .checks
            .iter()
            .map(|c| format!("  {:<20} {} ({:e} vs {:e})", c.name, if c.pass { "PASS" } else { "FAIL" }, c.value, c.threshold)),
    );
    let text = lines.join("\n");
    if pass {
        Ok(text)
    } else {
        Err(Failure::numeric(text))
    }
}

#[derive(Serialize)]
struct LowerBoundSummary<'a> {
    model: &'a ModelParams,
    seed: u64,
    #[serde(flatten)]
    estimate: &'a LowerBoundEstimate,
}

pub fn lowerbound(ctx: &Context) -> Result<String, Failure> {
    let sec = section(&ctx.config.lowerbound, "lowerbound", "lowerbound")?;
    let est = estimate_lower_bound(ctx.model(), sec.rho, sec.b, &ctx.settings(sec.n_samples, sec.nsub))?;
    ctx.write_json(
        "lowerbound.json",
        &LowerBoundSummary {
            model: ctx.model(),
            seed: ctx.seed,
            estimate: &est,
        },
    )?;
    Ok(format!(
        "lowerbound: p_gamma = {}, p_d = {}, beta* = {:?}",
        est.p_gamma, est.p_d, est.beta_star
    ))
}

#[derive(Serialize)]
struct LadderSummary<'a> {
    model: &'a ModelParams,
    seed: u64,
    n_walks: u64,
    max_len: u64,
    censored_fraction: f64,
    median_epoch: Option<u64>,
    tail: &'a [(u64, f64)],
}

pub fn ladder(ctx: &Context) -> Result<String, Failure> {
    let sec = section(&ctx.config.ladder, "ladder", "ladder")?;
    let st = ladder_stats(ctx.model(), sec.n_walks, sec.max_len, ctx.seed, ctx.workers)?;
    ctx.write_csv("ladder.csv", |w| write_ladder_csv(w, &st.tail))?;
    ctx.write_json(
        "ladder.json",
        &LadderSummary {
            model: ctx.model(),
            seed: ctx.seed,
            n_walks: sec.n_walks,
            max_len: sec.max_len,
            censored_fraction: st.censored_fraction(),
            median_epoch: st.median(),
            tail: &st.tail,
        },
    )?;
    Ok(format!(
        "ladder: median epoch {:?}, censored {}",
        st.median(),
        st.censored_fraction()
    ))
}
