use std::path::{Path, PathBuf};

use ruinkit::numerics::geometric_grid;
use ruinkit::path_sim::Horizon;
use ruinkit::solver::SolveOptions;
use ruinkit::ModelParams;
use serde::Deserialize;

use crate::Failure;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    #[serde(default)]
    pub seed: u64,
    /// Falls back to `RUINKIT_WORKERS`, then 1.
    pub workers: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub simulate: Option<SimulateSection>,
    pub curve: Option<CurveSection>,
    pub solve: Option<SolveOptions>,
    pub roots: Option<RootsSection>,
    pub fit: Option<FitSection>,
    pub crossval: Option<CrossvalSection>,
    pub lowerbound: Option<LowerBoundSection>,
    pub ladder: Option<LadderSection>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::input(format!("INVALID_CONFIG: cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::input(format!("INVALID_CONFIG: {}: {e}", path.display())))
    }
}

/// Returns the section or a `MISSING_SECTION` input error.
pub fn section<'a, T>(value: &'a Option<T>, name: &str, command: &str) -> Result<&'a T, Failure> {
    value
        .as_ref()
        .ok_or_else(|| Failure::input(format!("MISSING_SECTION: `{command}` needs a `{name}` section in the config")))
}

/// Initial capitals: an explicit list, or `{"lo", "hi", "n"}` for `n`
/// log-spaced points.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Points(Vec<f64>),
    LogSpaced(LogSpaced),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogSpaced {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Grid {
    pub fn points(&self) -> Result<Vec<f64>, Failure> {
        let pts = match self {
            Grid::Points(p) => p.clone(),
            Grid::LogSpaced(LogSpaced { lo, hi, n: 1 }) if lo == hi => vec![*lo],
            Grid::LogSpaced(g) => {
                if !(g.n >= 2 && g.lo > 0.0 && g.hi > g.lo && g.hi.is_finite()) {
                    return Err(Failure::input(format!(
                        "INVALID_CONFIG: log-spaced grid needs 0 < lo < hi and n >= 2 (got {g:?})"
                    )));
                }
                geometric_grid(g.lo, g.hi, g.n)
            }
        };
        if pts.is_empty() || pts.iter().any(|u| !(*u > 0.0 && u.is_finite())) {
            return Err(Failure::input("INVALID_CONFIG: capital grid must be non-empty, finite and positive"));
        }
        Ok(pts)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub u: Grid,
    pub n_paths: u64,
    /// Defaults to the automatic barrier policy with `max_jumps` set to the
    /// largest entry of `horizons`.
    pub horizon: Option<Horizon>,
    /// Jump horizons reported from the same paths.
    pub horizons: Option<Vec<u64>>,
    pub nsub: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSection {
    pub u: Grid,
    pub n_paths: u64,
    pub horizon: Option<Horizon>,
    pub nsub: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RootsSection {
    pub u: Grid,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    /// Solver or MC table; defaults to `solution.csv` in the output directory.
    pub input: Option<PathBuf>,
    pub fit_range: [f64; 2],
    /// Weight MC points by their standard errors.
    #[serde(default = "yes")]
    pub weighted: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossvalSection {
    pub u: Grid,
    pub n_paths: u64,
    pub horizon: Option<Horizon>,
    pub nsub: Option<usize>,
    #[serde(default = "default_fit_range")]
    pub fit_range: [f64; 2],
    /// Allowed `|psi_solver - p_hat|` is `z * stderr + slack`.
    #[serde(default = "default_z")]
    pub z: f64,
    #[serde(default = "default_slack")]
    pub slack: f64,
    /// Relative tolerance on the fitted exponent.
    #[serde(default = "default_beta_tol")]
    pub beta_tol: f64,
    /// Bound on `max |IDE residual| / (alpha1 + alpha2)`.
    #[serde(default = "default_residual_tol")]
    pub residual_tol: f64,
    #[serde(default = "default_censor_tol")]
    pub censor_tol: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowerBoundSection {
    pub rho: f64,
    pub b: f64,
    pub n_samples: u64,
    pub nsub: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderSection {
    pub n_walks: u64,
    pub max_len: u64,
}

fn yes() -> bool {
    true
}
fn default_fit_range() -> [f64; 2] {
    [1e2, 1e4]
}
fn default_z() -> f64 {
    3.0
}
fn default_slack() -> f64 {
    1e-3
}
fn default_beta_tol() -> f64 {
    0.1
}
fn default_residual_tol() -> f64 {
    1e-4
}
fn default_censor_tol() -> f64 {
    0.01
}
