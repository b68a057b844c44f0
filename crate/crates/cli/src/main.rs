//! `simcurve`: simulate, register and validate plane-similarity curve
//! models, and run the sectioned loads pipeline.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error,
//! 4 numerical failure. Logs go to standard error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use simcurve::{Error, Result, ToyReference};

use commands::SimulateKind;
use config::{Check, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "simcurve", version, about = "Plane-similarity curve registration")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random stream; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for output files [default: out].
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads [default: available processors].
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a toy or loads-analog dataset.
    Simulate(SimulateArgs),
    /// Register every curve of a file against a reference.
    Register(RegisterArgs),
    /// Run Monte Carlo checks of the estimator.
    Validate(ValidateArgs),
    /// Train and score the sectioned loads pipeline.
    Pipeline(PipelineArgs),
    /// Print a summary of the result files in the output directory.
    Report,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Toy curves (the default).
    #[arg(long)]
    toy: bool,
    /// Sectioned loads-analog curves with inputs.
    #[arg(long, conflicts_with = "toy")]
    loads: bool,
    /// Points per toy curve.
    #[arg(long)]
    n: Option<usize>,
    /// Number of curves.
    #[arg(long)]
    k: Option<usize>,
    /// Noise level: absolute for toy curves, relative to amplitude for loads.
    #[arg(long, allow_hyphen_values = true)]
    sigma: Option<f64>,
    /// Use the unscaled toy reference.
    #[arg(long)]
    raw: bool,
}

#[derive(Args, Debug)]
struct RegisterArgs {
    /// Curves as `curve_id,x,y` (or `x,y`) CSV.
    #[arg(long)]
    input: Option<PathBuf>,
    /// `toy`, `toy-raw`, or a CSV of reference samples on the curves' grid.
    #[arg(long)]
    reference: Option<String>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Checks to run.
    #[arg(long, value_enum, value_delimiter = ',')]
    checks: Vec<Check>,
    /// Replicates for every check.
    #[arg(long)]
    replicates: Option<usize>,
    /// Noise level of the simulated curves.
    #[arg(long, allow_hyphen_values = true)]
    sigma: Option<f64>,
}

#[derive(Args, Debug)]
struct PipelineArgs {
    /// Inputs table (`curve_id` plus one column per input).
    #[arg(long, requires_all = ["curves", "layout"])]
    inputs: Option<PathBuf>,
    /// Curves table (`curve_id`, `s0`, `s1`, ...).
    #[arg(long)]
    curves: Option<PathBuf>,
    /// JSON with `station_axis` and `breakpoints`.
    #[arg(long)]
    layout: Option<PathBuf>,
}

fn build_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed.or(cfg.seed) {
        cfg.apply_seed(seed);
    }
    if cli.out_dir.is_some() {
        cfg.out_dir.clone_from(&cli.out_dir);
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    match &cli.command {
        Command::Simulate(a) => {
            let loads = a.loads;
            if let Some(n) = a.n {
                cfg.simulate.toy.n_points = n;
            }
            if let Some(k) = a.k {
                if loads {
                    cfg.simulate.loads.n_curves = k;
                } else {
                    cfg.simulate.toy.n_curves = k;
                }
            }
            if let Some(s) = a.sigma {
                if loads {
                    cfg.simulate.loads.relative_noise = s;
                } else {
                    cfg.simulate.toy.sigma = s;
                }
            }
            if a.raw {
                cfg.simulate.toy.reference = ToyReference::Raw;
            }
        }
        Command::Register(a) => {
            if a.input.is_some() {
                cfg.register.input.clone_from(&a.input);
            }
            if a.reference.is_some() {
                cfg.register.reference.clone_from(&a.reference);
            }
        }
        Command::Validate(a) => {
            let v = &mut cfg.validate;
            if !a.checks.is_empty() {
                v.checks.clone_from(&a.checks);
            }
            if let Some(r) = a.replicates {
                v.sweep_replicates = r;
                v.clt_replicates = r;
                v.gap_replicates = r;
                v.spacing_replicates = r;
            }
            if let Some(s) = a.sigma {
                v.mc.sigma = s;
            }
        }
        Command::Pipeline(a) => {
            if a.inputs.is_some() {
                cfg.pipeline.inputs.clone_from(&a.inputs);
                cfg.pipeline.curves.clone_from(&a.curves);
                cfg.pipeline.layout.clone_from(&a.layout);
            }
        }
        Command::Report => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = build_config(&cli)?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    match &cli.command {
        Command::Simulate(a) => {
            let kind = if a.loads { SimulateKind::Loads } else { SimulateKind::Toy };
            commands::simulate(&cfg, kind, &dir)
        }
        Command::Register(_) => commands::register(&cfg, &dir),
        Command::Validate(_) => commands::validate(&cfg, &dir),
        Command::Pipeline(_) => commands::pipeline(&cfg, &dir),
        Command::Report => {
            print!("{}", commands::report(&dir)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
