//! `pdmp`: experiment runner for the telegraph-process laboratory.

mod config;
mod experiments;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::anyhow;
use clap::{Parser, Subcommand};
use serde_json::json;

use config::ExperimentConfig;
use experiments::Failure;

#[derive(Parser)]
#[command(
    name = "pdmp",
    version,
    about = "Simulation and coupling experiments for telegraph-type PDMPs"
)]
struct Cli {
    #[command(subcommand)]
    experiment: Experiment,

    /// TOML or JSON experiment config
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true)]
    replicas: Option<usize>,

    /// output directory
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Experiment {
    /// Exact paths from one start
    Simulate,
    /// Marginal laws over time against the invariant law
    Invariant,
    /// Coupling times of two starts
    Couple,
    /// Total-variation decay between two starts, with an exponential fit
    Decay,
    /// Parameter search and bound evaluation
    Bounds,
    /// Diffusive scaling and martingale diagnostics
    Scaling,
}

impl Experiment {
    fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Invariant => "invariant",
            Experiment::Couple => "couple",
            Experiment::Decay => "decay",
            Experiment::Bounds => "bounds",
            Experiment::Scaling => "scaling",
        }
    }
}

fn configure(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => config::load(path).map_err(Failure::Config)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(n) = cli.replicas {
        cfg.replicas = Some(n);
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Ok(v) = std::env::var("PDMP_THREADS") {
        let threads: usize = v.parse().ok().filter(|&t| t > 0).ok_or_else(|| {
            Failure::Config(anyhow!(
                "PDMP_THREADS must be a positive integer, got {v:?}"
            ))
        })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::Run(e.into()))?;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<serde_json::Value, Failure> {
    let cfg = configure(cli)?;
    let result = match cli.experiment {
        Experiment::Simulate => experiments::simulate(&cfg),
        Experiment::Invariant => experiments::invariant(&cfg),
        Experiment::Couple => experiments::couple(&cfg),
        Experiment::Decay => experiments::decay(&cfg),
        Experiment::Bounds => experiments::bounds(&cfg),
        Experiment::Scaling => experiments::scaling(&cfg),
    }?;
    Ok(json!({
        "experiment": cli.experiment.name(),
        "seed": cfg.seed,
        "out": cfg.out,
        "result": result,
    }))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("pdmp {}: {}", cli.experiment.name(), f.message());
            ExitCode::from(f.exit_code())
        }
    }
}
