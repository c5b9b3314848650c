//! `prnls`: ground states, the perturbative construction, and the numerical
//! checks around it, driven from the command line or a TOML config.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::config::{Command, Overrides};
use crate::output::Manifest;

#[derive(Debug, Parser)]
#[command(name = "prnls", version, about = "Standing waves of the pseudo-relativistic NLS by spectral methods")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Positive radial ground state of -Δu + u = u^p.
    GroundState(Opts),
    /// Fixed-point construction u_c = u_inf + w at one c.
    Solve(Opts),
    /// Solve over a geometric ladder of c values.
    Sweep(Opts),
    /// Fit the decay of ||u_c - u_inf|| in c.
    RateSweep(Opts),
    /// Nehari and Pohozaev identities of converged solutions.
    IdentityCheck(Opts),
    /// Non-existence certificate plus seeded probe runs.
    Certify(Opts),
    /// Pointwise and derivative bounds of the symbols.
    SymbolCheck(Opts),
    /// Empirical operator norms of P_c(D) and its inverse difference.
    NormProbe(Opts),
    /// Run whatever `command` the config file names.
    Run(Opts),
}

#[derive(Debug, Args)]
struct Opts {
    /// TOML config; command-line values take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: $PRNLS_OUTPUT_DIR, then ./prnls-out).
    #[arg(long, short)]
    output_dir: Option<PathBuf>,
    /// Worker threads for sweeps and probe campaigns.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    m: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    /// Grid points per axis (power of two).
    #[arg(long)]
    points: Option<usize>,
    /// Half-width L of the periodic box [-L, L)^n.
    #[arg(long)]
    half_width: Option<f64>,
    #[arg(long)]
    tol_gs: Option<f64>,
    #[arg(long)]
    tol_lin: Option<f64>,
    #[arg(long)]
    tol_step: Option<f64>,
    #[arg(long)]
    tol_residual: Option<f64>,
    #[arg(long)]
    c_min: Option<f64>,
    #[arg(long)]
    c_max: Option<f64>,
    #[arg(long)]
    rungs: Option<usize>,
    /// Seeded runs for `certify`.
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Random fields per (c, q) for `norm-probe`.
    #[arg(long)]
    trials: Option<usize>,
    /// Samples per c for `symbol-check`.
    #[arg(long)]
    samples: Option<usize>,
}

impl Opts {
    fn overrides(&self, command: Option<Command>) -> Overrides {
        Overrides {
            command,
            n: self.n,
            p: self.p,
            m: self.m,
            mu: self.mu,
            c: self.c,
            points: self.points,
            half_width: self.half_width,
            tol_gs: self.tol_gs,
            tol_lin: self.tol_lin,
            tol_step: self.tol_step,
            tol_residual: self.tol_residual,
            c_min: self.c_min,
            c_max: self.c_max,
            rungs: self.rungs,
            runs: self.runs,
            max_iter: self.max_iter,
            trials: self.trials,
            samples: self.samples,
            output_dir: self.output_dir.clone(),
            seed: self.seed,
        }
    }
}

enum Failure {
    Usage(anyhow::Error),
    Numeric(anyhow::Error),
}

fn execute(cli: Cli) -> Result<bool, Failure> {
    use Sub::*;
    let (command, opts) = match cli.command {
        GroundState(o) => (Some(Command::GroundState), o),
        Solve(o) => (Some(Command::Solve), o),
        Sweep(o) => (Some(Command::Sweep), o),
        RateSweep(o) => (Some(Command::RateSweep), o),
        IdentityCheck(o) => (Some(Command::IdentityCheck), o),
        Certify(o) => (Some(Command::Certify), o),
        SymbolCheck(o) => (Some(Command::SymbolCheck), o),
        NormProbe(o) => (Some(Command::NormProbe), o),
        Run(o) => (None, o),
    };
    let file = match &opts.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(Failure::Usage)?;
            config::parse_file(&text).map_err(Failure::Usage)?
        }
        None => config::FileConfig::default(),
    };
    let env_dir = std::env::var_os(config::OUTPUT_DIR_ENV).map(PathBuf::from);
    let cfg = config::resolve(file, opts.overrides(command), env_dir).map_err(Failure::Usage)?;
    if opts.threads == 0 {
        return Err(Failure::Usage(anyhow::anyhow!("--threads must be >= 1")));
    }

    let argv: Vec<String> = std::env::args().collect();
    let manifest = Manifest::start(&cfg, &argv, opts.threads).map_err(Failure::Usage)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads)
        .build()
        .context("building worker pool")
        .map_err(Failure::Usage)?;
    let start = Instant::now();
    let result = pool.install(|| commands::run(&cfg));
    match result {
        Ok(mut outcome) => {
            outcome.timings.push(("total", start.elapsed()));
            let state = if outcome.success { "ok" } else { "not-converged" };
            manifest.finish(state, &outcome.timings, &outcome.artifacts).map_err(Failure::Usage)?;
            for line in &outcome.summary {
                println!("{line}");
            }
            println!("artifacts in {}", cfg.output_dir.display());
            Ok(outcome.success)
        }
        Err(e) => {
            let _ = manifest.finish("failed", &[("total", start.elapsed())], &[]);
            let numeric = e.chain().any(|c| c.downcast_ref::<prnls_core::Error>().is_some_and(is_numeric));
            Err(if numeric { Failure::Numeric(e) } else { Failure::Usage(e) })
        }
    }
}

fn is_numeric(e: &prnls_core::Error) -> bool {
    use prnls_core::Error::*;
    matches!(
        e,
        Convergence { .. } | Collapse { .. } | Stagnation { .. } | MaxIterations { .. } | DegenerateFit(_)
    )
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(Failure::Numeric(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
