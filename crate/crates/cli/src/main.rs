//! `spm-epi`: simulate compartmental malware epidemics, reconstruct traces
//! from connection logs, select the best-fitting model, infer SIIDR
//! transition rates, and run graph threshold experiments.

mod commands;
mod config;
mod outputs;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use std::path::PathBuf;

use config::Config;
use outputs::Outputs;

#[derive(Debug, Parser)]
#[command(name = "spm-epi", version, about)]
struct Cli {
    /// RNG seed; falls back to $SPM_EPI_SEED, then 0.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory receiving all output files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Worker threads (default: all cores). `--threads 1` reproduces
    /// parallel results exactly.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Flat key=value config file; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the model ODEs or run chain-binomial realizations.
    Simulate(commands::SimulateArgs),
    /// Rebuild the epidemic curve from a connection log.
    Reconstruct(commands::ReconstructArgs),
    /// Grid-search AIC model selection against a trace.
    Select(commands::SelectArgs),
    /// ABC-SMC posterior inference of SIIDR transition rates.
    Infer(commands::InferArgs),
    /// Phase-transition sweep over the spectral threshold s.
    Sweep(commands::SweepArgs),
    /// Graph utilities: generate, stats, leading eigenvalue.
    #[command(subcommand)]
    Graph(commands::GraphCommand),
}

fn resolve_seed(cli: &Cli, config: &Config) -> Result<u64> {
    if let Some(seed) = cli.seed {
        return Ok(seed);
    }
    if let Some(seed) = config.get::<u64>("seed")? {
        return Ok(seed);
    }
    match std::env::var("SPM_EPI_SEED") {
        Ok(raw) => raw
            .parse()
            .with_context(|| format!("SPM_EPI_SEED must be an unsigned integer, got '{raw}'")),
        Err(_) => Ok(0),
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err:#}");
            1
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<()> {
    let config = Config::load(cli.config.as_deref())?;
    let seed = resolve_seed(&cli, &config)?;
    let threads = match cli.threads {
        Some(n) => n,
        None => config.get::<usize>("threads")?.unwrap_or(0), // 0: rayon default
    };
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("initializing thread pool")?;
    }

    let mut outputs = Outputs::new(&cli.out)?;
    let ctx = commands::RunContext { seed, config };
    let result = match &cli.command {
        Command::Simulate(args) => commands::simulate(args, &ctx, &mut outputs),
        Command::Reconstruct(args) => commands::reconstruct(args, &ctx, &mut outputs),
        Command::Select(args) => commands::select(args, &ctx, &mut outputs),
        Command::Infer(args) => commands::infer(args, &ctx, &mut outputs),
        Command::Sweep(args) => commands::sweep(args, &ctx, &mut outputs),
        Command::Graph(args) => commands::graph(args, &ctx, &mut outputs),
    };
    match result {
        Ok(manifest) => {
            let manifest = manifest.finish(&outputs, seed, threads);
            outputs.write_json("manifest.json", &manifest)?;
            Ok(())
        }
        Err(err) => {
            outputs.discard();
            Err(err)
        }
    }
}
