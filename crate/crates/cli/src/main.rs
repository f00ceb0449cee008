use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;
use radial_cmc_cli::{exit_code, parse_grid, run, ConfigMap, EXIT_USAGE};

/// Constant mean curvature radial graph over a spherical cap.
#[derive(Debug, Parser)]
#[command(name = "radial-cmc", version)]
struct Args {
    /// Key-value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Grid resolution.
    #[arg(long, value_name = "NTHETA,NPHI")]
    grid: Option<String>,
    /// Only report errors.
    #[arg(long)]
    quiet: bool,
}

fn build(args: &Args) -> Result<radial_cmc_cli::RunConfig> {
    let mut map = match &args.config {
        Some(path) => ConfigMap::load(path)?,
        None => ConfigMap::default(),
    };
    for pair in &args.set {
        map.set_pair(pair)?;
    }
    if let Some(out) = &args.out {
        map.set("out", &out.to_string_lossy())?;
    }
    if let Some(g) = &args.grid {
        let (nt, np) = parse_grid(g)?;
        map.set("n_theta", &nt.to_string())?;
        map.set("n_phi", &np.to_string())?;
    }
    map.build()
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let level = if args.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let cfg = match build(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(exit_code(&e) as u8);
        }
    };
    match run(&cfg) {
        Ok(s) => {
            if !args.quiet {
                println!(
                    "converged: residual {:.2e}, {} steps, C = {}, u in [{:.6}, {:.6}]; wrote {}",
                    s.final_residual,
                    s.steps,
                    s.homotopy_c,
                    s.min_u,
                    s.max_u,
                    s.out_dir.display()
                );
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
