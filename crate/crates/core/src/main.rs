//! Command-line front end: `backus solve --config run.cfg [overrides]`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use backus_core::report::{failure_stage, run, RunConfig};
use backus_core::Error;

#[derive(Parser)]
#[command(
    name = "backus",
    about = "Perturbation solver for the exterior potential from surface intensity data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the perturbation cascade and write the requested reports.
    Solve(SolveArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Config file (flat key = value with [sections]); defaults apply
    /// when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Boundary model: degree1, degree4, or external:<path>.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Mesh radius (>= 1).
    #[arg(long)]
    radius: Option<f64>,
    /// Mesh: ico, uv:NxM, or tri:<path>.
    #[arg(long)]
    mesh: Option<String>,
    /// Perturbation order (1..=3).
    #[arg(long)]
    order: Option<usize>,
    /// Gauss-Legendre order of the zeta rule.
    #[arg(long = "n-gauss")]
    n_gauss: Option<usize>,
    /// Absolute and relative tolerance of the adaptive rule.
    #[arg(long)]
    tol: Option<f64>,
    /// Largest harmonic degree of the fit basis (1..=4).
    #[arg(long = "basis-lmax")]
    basis_lmax: Option<u32>,
    /// Output directory for report files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long, default_value_t = false)]
    print_config: bool,
}

fn build_config(args: &SolveArgs) -> Result<RunConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(model) = &args.model {
        cfg.model = model.parse()?;
    }
    if let Some(epsilon) = args.epsilon {
        cfg.epsilon = epsilon;
    }
    if let Some(radius) = args.radius {
        cfg.radius = radius;
    }
    if let Some(mesh) = &args.mesh {
        cfg.mesh = mesh.parse()?;
    }
    if let Some(order) = args.order {
        cfg.order = order;
    }
    if let Some(n) = args.n_gauss {
        cfg.quadrature.n_gauss_zeta = n;
    }
    if let Some(tol) = args.tol {
        cfg.quadrature.inner_abs_tol = tol;
        cfg.quadrature.inner_rel_tol = tol;
    }
    if let Some(lmax) = args.basis_lmax {
        cfg.basis_lmax = lmax;
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Solve(args) = cli.command;

    let cfg = match build_config(&args) {
        Ok(cfg) => cfg,
        Err(err) => {
            eprintln!("config error: {err}");
            return ExitCode::from(2);
        }
    };
    if args.print_config {
        print!("{}", cfg.to_config_string());
        return ExitCode::SUCCESS;
    }
    match run(&cfg) {
        Ok(summary) => {
            for file in summary.files {
                println!("wrote {}", file.display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("failure during {}: {err}", failure_stage(&err));
            ExitCode::from(3)
        }
    }
}
