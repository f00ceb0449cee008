//! Library side of the `radial-cmc` command: configuration, the solve pipeline and exit codes.

pub mod config;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use radial_cmc::io::{export_mesh, load_field_csv, save_field_csv, write_certificates, write_trace_csv};
use radial_cmc::{example1_pair, solve_cmc, ContinuationTrace, Error, PolarGrid, ScalarField};

pub use config::{parse_grid, ConfigMap, RunConfig, SubsolutionSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_HYPOTHESIS: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_CONTINUATION: i32 = 4;
pub const EXIT_IO: i32 = 5;

/// Exit status for a failed run, from the first library or I/O error in the chain.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::HypothesisViolated(_) | Error::SearchExhausted { .. } => EXIT_HYPOTHESIS,
                Error::SingularMatrix(_) | Error::LineSearchFailed { .. } | Error::MaxItersExceeded { .. } => EXIT_SOLVER,
                Error::StepUnderflow { .. } => EXIT_CONTINUATION,
                Error::Io(_) => EXIT_IO,
                _ => EXIT_USAGE,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
    }
    EXIT_USAGE
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub final_residual: f64,
    pub steps: usize,
    pub homotopy_c: f64,
    pub min_u: f64,
    pub max_u: f64,
}

fn subsolution(cfg: &RunConfig, grid: &PolarGrid) -> Result<ScalarField> {
    Ok(match &cfg.subsolution {
        SubsolutionSpec::Constant(c) => ScalarField::constant(*grid, *c)?,
        SubsolutionSpec::Example1 { h } => example1_pair(cfg.domain.theta_max().sin(), *h, grid)?.0,
        SubsolutionSpec::File(path) => {
            let u = load_field_csv(path).with_context(|| format!("reading subsolution {}", path.display()))?;
            if u.grid() != grid {
                bail!("subsolution file {} was written for a different grid", path.display());
            }
            u
        }
    })
}

fn write_trace(trace: &ContinuationTrace, dir: &Path) -> Result<()> {
    let path = dir.join("trace.csv");
    let mut w = BufWriter::new(fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?);
    write_trace_csv(trace, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Solves and writes `solution.csv`, `trace.csv`, `certificates.txt` and `surface.obj`.
/// A step underflow still writes the partial trace.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    let grid = PolarGrid::new(cfg.domain, cfg.n_theta, cfg.n_phi)?;
    let ubar = subsolution(cfg, &grid)?;
    let dir = &cfg.out_dir;
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;

    let sol = match solve_cmc(&grid, &cfg.phi, &ubar, cfg.h_target, &cfg.solver) {
        Ok(sol) => sol,
        Err(Error::StepUnderflow { t, step, trace }) => {
            write_trace(&trace, dir)?;
            return Err(Error::StepUnderflow { t, step, trace }.into());
        }
        Err(e) => return Err(e.into()),
    };

    save_field_csv(&sol.u, &dir.join("solution.csv"))?;
    write_trace(&sol.trace, dir)?;
    let cert_path = dir.join("certificates.txt");
    let mut w = BufWriter::new(fs::File::create(&cert_path)?);
    write_certificates(&sol, &mut w)?;
    w.flush()?;
    export_mesh(&sol.u, &dir.join("surface.obj"))?;

    Ok(RunSummary {
        out_dir: dir.clone(),
        final_residual: sol.final_residual,
        steps: sol.trace.entries.len(),
        homotopy_c: sol.constants.c,
        min_u: sol.u.min(),
        max_u: sol.u.max(),
    })
}
