//! CSV tables and JSON summaries. Floats are written in the shortest form
//! that parses back to the same value.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::asymptotics::CharRoots;
use crate::error::{Result, RuinError};
use crate::mc::MCEstimate;
use crate::solver::GridSolution;

pub const MC_HEADER: [&str; 8] = ["u", "p_hat", "stderr", "ci_lo", "ci_hi", "censored_fraction", "n_paths", "seed"];
pub const SOLUTION_HEADER: [&str; 7] = ["u", "phi", "g", "i1", "i2", "residual_ide", "residual_ode3"];
pub const LADDER_HEADER: [&str; 2] = ["n", "tail"];
pub const ROOTS_HEADER: [&str; 4] = ["u", "lambda1", "lambda2", "lambda3"];

pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        ryu::Buffer::new().format_finite(x).to_owned()
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn write_mc_csv<W: Write>(out: W, rows: &[MCEstimate]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(MC_HEADER)?;
    for e in rows {
        w.write_record(mc_record(e))?;
    }
    w.flush()?;
    Ok(())
}

/// Estimates at several horizons: the MC columns preceded by `max_jumps`.
pub fn write_mc_horizons_csv<W: Write>(out: W, rows: &[(u64, MCEstimate)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(std::iter::once("max_jumps").chain(MC_HEADER))?;
    for (h, e) in rows {
        w.write_record(std::iter::once(h.to_string()).chain(mc_record(e)))?;
    }
    w.flush()?;
    Ok(())
}

fn mc_record(e: &MCEstimate) -> [String; 8] {
    [
        fmt_f64(e.u),
        fmt_f64(e.p_hat),
        fmt_f64(e.stderr),
        fmt_f64(e.ci95.0),
        fmt_f64(e.ci95.1),
        fmt_f64(e.censored_fraction),
        e.n_paths.to_string(),
        e.seed.to_string(),
    ]
}

pub fn write_solution_csv<W: Write>(out: W, sol: &GridSolution) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SOLUTION_HEADER)?;
    for i in 0..sol.u.len() {
        w.write_record(
            [sol.u[i], sol.phi[i], sol.g[i], sol.i1[i], sol.i2[i], sol.residual_ide[i], sol.residual_ode3[i]].map(fmt_f64),
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_ladder_csv<W: Write>(out: W, tail: &[(u64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LADDER_HEADER)?;
    for &(n, p) in tail {
        w.write_record([n.to_string(), fmt_f64(p)])?;
    }
    w.flush()?;
    Ok(())
}

/// Real parts of the labelled roots; complex points are reported separately
/// in the run summary.
pub fn write_roots_csv<W: Write>(out: W, roots: &[CharRoots]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ROOTS_HEADER)?;
    for r in roots {
        w.write_record([r.u, r.lambda[0].re, r.lambda[1].re, r.lambda[2].re].map(fmt_f64))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut f = File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

/// Ruin probability curve read back from an MC or solver table.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub u: Vec<f64>,
    pub psi: Vec<f64>,
    /// Present for Monte Carlo tables.
    pub stderr: Option<Vec<f64>>,
}

pub fn read_curve<R: Read>(input: R) -> Result<Curve> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let u_col = col("u").ok_or_else(|| RuinError::InvalidArgument("curve table has no `u` column".into()))?;
    enum Kind {
        Mc(usize, usize),
        Solver(usize),
    }
    let kind = match (col("p_hat"), col("stderr"), col("phi")) {
        (Some(p), Some(s), _) => Kind::Mc(p, s),
        (_, _, Some(phi)) => Kind::Solver(phi),
        _ => {
            return Err(RuinError::InvalidArgument(
                "curve table needs `p_hat` and `stderr`, or `phi`".into(),
            ))
        }
    };
    let mut curve = Curve {
        u: Vec::new(),
        psi: Vec::new(),
        stderr: matches!(kind, Kind::Mc(..)).then(Vec::new),
    };
    for rec in r.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .trim()
                .parse::<f64>()
                .map_err(|e| RuinError::InvalidArgument(format!("bad number {:?}: {e}", &rec[i])))
        };
        curve.u.push(num(u_col)?);
        match kind {
            Kind::Mc(p, s) => {
                curve.psi.push(num(p)?);
                curve.stderr.as_mut().expect("mc curve").push(num(s)?);
            }
            Kind::Solver(phi) => curve.psi.push(1.0 - num(phi)?),
        }
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 123456789.125, -2.5e-7] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(1.0), "1.0");
    }

    #[test]
    fn mc_table_reads_back_as_curve() {
        let e = MCEstimate {
            u: 10.0,
            p_hat: 0.25,
            stderr: 0.01,
            ci95: (0.2, 0.3),
            n_paths: 100,
            n_ruined: 25,
            censored_fraction: 0.0,
            barrier_fraction: 0.5,
            runtime: 1.0,
            seed: 7,
            censoring_flag: false,
        };
        let mut buf = Vec::new();
        write_mc_csv(&mut buf, &[e.clone(), MCEstimate { u: 20.0, ..e }]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("u,p_hat,stderr,ci_lo,ci_hi,censored_fraction,n_paths,seed\n"));
        let c = read_curve(&buf[..]).unwrap();
        assert_eq!(c.u, vec![10.0, 20.0]);
        assert_eq!(c.psi, vec![0.25, 0.25]);
        assert_eq!(c.stderr, Some(vec![0.01, 0.01]));
    }

    #[test]
    fn solver_table_reads_back_as_ruin_curve() {
        let text = "u,phi,g,i1,i2,residual_ide,residual_ode3\n1.0,0.75,0,0,0,0,0\n2.0,0.875,0,0,0,0,0\n";
        let c = read_curve(text.as_bytes()).unwrap();
        assert_eq!(c.psi, vec![0.25, 0.125]);
        assert!(c.stderr.is_none());
        assert!(read_curve("x,y\n1,2\n".as_bytes()).is_err());
    }
}
