//! Subcommand implementations. Each returns a manifest draft; `main` writes
//! the manifest only after every other output landed.

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use serde_json::json;
use std::path::PathBuf;

use spm_epi_core::abc::{self, ObservedData, SmcConfig};
use spm_epi_core::graph::{self, Generator, Graph};
use spm_epi_core::models::{integrate_ode, r0_basic, CompartmentState, Model, RateParams};
use spm_epi_core::nlds::{phase_transition_sweep, SweepConfig, SweepInit};
use spm_epi_core::select::{select_model, GridSpec};
use spm_epi_core::stochastic::{simulate_avg, simulate_ensemble, write_ensemble_csv, SimConfig};
use spm_epi_core::trace::{
    self, parse_log, reconstruct as reconstruct_trace, truncate_plateau, EpidemicTrace,
    InternalFilter, LogFormat, ParseMode,
};

use crate::config::Config;
use crate::outputs::Outputs;

pub struct RunContext {
    pub seed: u64,
    pub config: Config,
}

/// Manifest payload assembled by a command; the frame (seed, outputs,
/// timestamp) is added at the end of a successful run.
pub struct ManifestDraft {
    command: &'static str,
    resolved: serde_json::Value,
}

impl ManifestDraft {
    fn new(command: &'static str, resolved: serde_json::Value) -> Self {
        Self { command, resolved }
    }

    pub fn finish(self, outputs: &Outputs, seed: u64, threads: usize) -> serde_json::Value {
        let created_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        json!({
            "command": self.command,
            "resolved": self.resolved,
            "seed": seed,
            "threads": if threads == 0 { json!("auto") } else { json!(threads) },
            "outputs": outputs.files(),
            "created_unix": created_unix,
        })
    }
}

fn csv_string<F>(write: F) -> Result<String>
where
    F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
{
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Model: si, sis, sir, seir, siidr.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    gamma1: Option<f64>,
    #[arg(long)]
    gamma2: Option<f64>,
    /// SEIR incubation rate.
    #[arg(long)]
    sigma: Option<f64>,
    /// Integration step.
    #[arg(long)]
    dt: Option<f64>,
    /// Population size.
    #[arg(long)]
    n: Option<u64>,
    /// Initially infected hosts.
    #[arg(long)]
    i0: Option<u64>,
    #[arg(long)]
    steps: Option<usize>,
    /// ode | stochastic.
    #[arg(long)]
    mode: Option<String>,
    /// Stochastic realizations to average.
    #[arg(long)]
    h: Option<usize>,
    /// Also dump the raw stochastic ensemble.
    #[arg(long)]
    dump_ensemble: bool,
}

pub fn simulate(args: &SimulateArgs, ctx: &RunContext, out: &mut Outputs) -> Result<ManifestDraft> {
    let cfg = &ctx.config;
    let model: Model = cfg
        .resolve(args.model.clone(), "model", String::new())?
        .parse()
        .map_err(|e| anyhow!("{e}"))?;
    let beta = cfg.resolve(args.beta, "beta", 0.0)?;
    let mu = cfg.resolve(args.mu, "mu", 0.0)?;
    let gamma1 = cfg.resolve(args.gamma1, "gamma1", 0.0)?;
    let gamma2 = cfg.resolve(args.gamma2, "gamma2", 0.0)?;
    let sigma = cfg.resolve(args.sigma, "sigma", 0.0)?;
    let dt = cfg.resolve(args.dt, "dt", 0.1)?;
    let n = cfg.resolve(args.n, "n", 1000)?;
    let i0 = cfg.resolve(args.i0, "i0", 1)?;
    let steps = cfg.resolve(args.steps, "steps", 1000)?;
    let mode = cfg.resolve(args.mode.clone(), "mode", "ode".to_string())?;
    let h = cfg.resolve(args.h, "h", 10)?;

    if i0 == 0 || i0 > n {
        bail!("i0 must lie in [1, n]");
    }
    let params = RateParams::new(beta, mu, gamma1, gamma2, sigma, dt)?;
    let init_counts = {
        let mut init = vec![0u64; model.compartment_count()];
        init[0] = n - i0;
        init[model.infectious_index()] = i0;
        init
    };

    let trajectory = match mode.as_str() {
        "ode" => {
            let counts: Vec<f64> = init_counts.iter().map(|&c| c as f64).collect();
            integrate_ode(model, &params, &CompartmentState::new(counts)?, steps)?
        }
        "stochastic" => {
            let sim = SimConfig::new(steps, ctx.seed, h)?;
            if args.dump_ensemble {
                let ensemble = simulate_ensemble(model, &params, &init_counts, &sim)?;
                out.write_string(
                    "ensemble.csv",
                    &csv_string(|buf| write_ensemble_csv(&ensemble, buf))?,
                )?;
            }
            simulate_avg(model, &params, &init_counts, &SimConfig::new(steps, ctx.seed, h)?)?
        }
        other => bail!("mode must be 'ode' or 'stochastic', got '{other}'"),
    };

    out.write_string("trajectory.csv", &csv_string(|buf| trajectory.write_csv(buf))?)?;

    let final_state = trajectory.states.last().expect("non-empty trajectory");
    let cumulative = trajectory.cumulative_infected();
    let infectious = model.infectious_index();
    let peak_infected =
        trajectory.states.iter().map(|s| s[infectious]).fold(f64::NEG_INFINITY, f64::max);
    let finals: serde_json::Map<String, serde_json::Value> = model
        .compartments()
        .iter()
        .zip(final_state)
        .map(|(label, value)| (label.to_string(), json!(value)))
        .collect();
    out.write_json(
        "summary.json",
        &json!({
            "model": model.to_string(),
            "mode": mode,
            "final": finals,
            "peak_infected": peak_infected,
            "final_cumulative_infected": cumulative.last(),
            "r0": r0_basic(&params).ok(),
        }),
    )?;

    Ok(ManifestDraft::new(
        "simulate",
        json!({
            "model": model.to_string(), "mode": mode, "beta": beta, "mu": mu,
            "gamma1": gamma1, "gamma2": gamma2, "sigma": sigma, "dt": dt,
            "n": n, "i0": i0, "steps": steps, "h": h,
            "dump_ensemble": args.dump_ensemble,
        }),
    ))
}

// ------------------------------------------------------------- reconstruct

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Connection log to parse.
    #[arg(long)]
    log: PathBuf,
    /// zeek | csv.
    #[arg(long)]
    format: Option<String>,
    /// Destination port labeled malicious.
    #[arg(long)]
    port: Option<u16>,
    /// rfc1918 | all | comma-separated CIDRs.
    #[arg(long)]
    internal: Option<String>,
    /// Skip unparsable rows instead of failing.
    #[arg(long)]
    lenient: bool,
    /// Cut the window at the last new infection.
    #[arg(long)]
    truncate_plateau: bool,
    /// Timestamp count for the dt = (t_N − t0)/T report.
    #[arg(long)]
    t_points: Option<usize>,
}

fn parse_internal(raw: &str) -> Result<InternalFilter> {
    match raw {
        "rfc1918" => Ok(InternalFilter::rfc1918()),
        "all" => Ok(InternalFilter::All),
        list => {
            let cidrs = list
                .split(',')
                .map(|c| c.trim().parse().map_err(|e| anyhow!("{e}")))
                .collect::<Result<Vec<_>>>()?;
            Ok(InternalFilter::Cidrs(cidrs))
        }
    }
}

pub fn reconstruct(
    args: &ReconstructArgs,
    ctx: &RunContext,
    out: &mut Outputs,
) -> Result<ManifestDraft> {
    let cfg = &ctx.config;
    let format_raw = cfg.resolve(args.format.clone(), "format", "zeek".to_string())?;
    let format = match format_raw.as_str() {
        "zeek" => LogFormat::TsvZeek,
        "csv" => LogFormat::CsvMinimal,
        other => bail!("format must be 'zeek' or 'csv', got '{other}'"),
    };
    let port = cfg.resolve(args.port, "port", trace::DEFAULT_MALICIOUS_PORT)?;
    let internal_raw = cfg.resolve(args.internal.clone(), "internal", "rfc1918".to_string())?;
    let internal = parse_internal(&internal_raw)?;
    let mode = if args.lenient { ParseMode::Lenient } else { ParseMode::Strict };

    let parsed = parse_log(&args.log, format, mode)?;
    let mut epidemic = reconstruct_trace(&parsed.records, port, &internal)?;
    if args.truncate_plateau {
        epidemic = truncate_plateau(&epidemic);
    }
    // Default T: the number of parsed communication timestamps.
    let t_points = match args.t_points {
        Some(t) => t,
        None => cfg.get::<usize>("t_points")?.unwrap_or(parsed.records.len()),
    };

    out.write_string("trace.csv", &csv_string(|buf| epidemic.write_csv(buf))?)?;
    let summary = trace::summarize(&epidemic, Some(&parsed.records), Some(t_points));
    out.write_json(
        "summary.json",
        &json!({
            "trace": summary,
            "skipped_rows": parsed.skipped,
            "records": parsed.records.len(),
            "malicious_port": port,
            "truncated": args.truncate_plateau,
        }),
    )?;

    Ok(ManifestDraft::new(
        "reconstruct",
        json!({
            "log": args.log.display().to_string(), "format": format_raw,
            "port": port, "internal": internal_raw,
            "lenient": args.lenient, "truncate_plateau": args.truncate_plateau,
            "t_points": t_points,
        }),
    ))
}

// ------------------------------------------------------------------ select

fn load_trace_with_population(path: &PathBuf, population: Option<u64>) -> Result<EpidemicTrace> {
    let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut tr = EpidemicTrace::from_curve_csv(std::io::BufReader::new(file))?;
    if let Some(n) = population {
        if (n as usize) < tr.infected_ips {
            bail!("population {n} is smaller than the {} infected hosts", tr.infected_ips);
        }
        tr.contacted_ips = n as usize;
    }
    Ok(tr)
}

fn resolve_t_points(
    t_points: Option<usize>,
    fit_dt: Option<f64>,
    cfg: &Config,
    duration: f64,
) -> Result<usize> {
    if t_points.is_some() && fit_dt.is_some() {
        bail!("give either --t-points or --fit-dt, not both");
    }
    if let Some(t) = t_points.or(cfg.get("t_points")?) {
        return Ok(t);
    }
    let fit_dt = match fit_dt.or(cfg.get("fit_dt")?) {
        Some(dt) if dt > 0.0 => dt,
        Some(dt) => bail!("fit dt must be > 0, got {dt}"),
        None => return Ok(1000),
    };
    Ok(((duration / fit_dt).round() as usize).max(1))
}

fn parse_grid(raw: &str) -> Result<GridSpec> {
    let mut grid = GridSpec::default();
    for part in raw.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| anyhow!("grid entry '{part}' is not key=count"))?;
        let count: usize = value.parse().with_context(|| format!("grid count '{value}'"))?;
        match key.trim() {
            "beta" => grid.beta = count,
            "mu" => grid.mu = count,
            "gamma1" => grid.gamma1 = count,
            "gamma2" => grid.gamma2 = count,
            "sigma" => grid.sigma = count,
            other => bail!("unknown grid parameter '{other}'"),
        }
    }
    Ok(grid)
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Trace curve CSV (t,cumulative_infected).
    #[arg(long)]
    trace: PathBuf,
    /// Population size (contacted hosts).
    #[arg(long)]
    n: Option<u64>,
    /// Comma-separated candidate models (default: all five).
    #[arg(long)]
    models: Option<String>,
    /// Per-parameter grid sizes, e.g. beta=20,mu=20,gamma1=10,gamma2=10.
    #[arg(long)]
    grid: Option<String>,
    /// Stochastic realizations averaged per grid point.
    #[arg(long)]
    h: Option<usize>,
    /// Fit-grid size T.
    #[arg(long)]
    t_points: Option<usize>,
    /// Alternative to --t-points: T = duration / fit-dt.
    #[arg(long)]
    fit_dt: Option<f64>,
    /// Trace label used in the CSV report.
    #[arg(long)]
    name: Option<String>,
}

pub fn select(args: &SelectArgs, ctx: &RunContext, out: &mut Outputs) -> Result<ManifestDraft> {
    let cfg = &ctx.config;
    let population = match args.n {
        Some(n) => Some(n),
        None => cfg.get("n")?,
    };
    let tr = load_trace_with_population(&args.trace, population)?;
    let t_points = resolve_t_points(args.t_points, args.fit_dt, cfg, tr.duration())?;
    let models: Vec<Model> = match cfg.resolve(args.models.clone(), "models", String::new())? {
        raw if raw.is_empty() => Model::ALL.to_vec(),
        raw => raw
            .split(',')
            .map(|m| m.trim().parse().map_err(|e| anyhow!("{e}")))
            .collect::<Result<_>>()?,
    };
    let grid = parse_grid(&cfg.resolve(args.grid.clone(), "grid", String::new())?)?;
    let h = cfg.resolve(args.h, "h", 10)?;
    let sim = SimConfig::new(t_points.max(1), ctx.seed, h)?;

    let report = select_model(&tr, &models, &grid, &sim, t_points)?;
    let name = args
        .name
        .clone()
        .or_else(|| args.trace.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "trace".to_string());
    out.write_string("selection.csv", &csv_string(|buf| report.write_csv(&name, buf))?)?;
    out.write_json("selection.json", &serde_json::to_value(&report)?)?;
    println!("best model: {}", report.best_model);

    Ok(ManifestDraft::new(
        "select",
        json!({
            "trace": args.trace.display().to_string(), "name": name,
            "population": report.population, "t_points": t_points,
            "models": models.iter().map(Model::to_string).collect::<Vec<_>>(),
            "grid": grid, "h": h,
        }),
    ))
}

// ------------------------------------------------------------------- infer

#[derive(Debug, Args)]
pub struct InferArgs {
    /// Trace curve CSV (t,cumulative_infected).
    #[arg(long)]
    trace: PathBuf,
    /// Population size (contacted hosts).
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    particles: Option<usize>,
    #[arg(long)]
    generations: Option<usize>,
    /// Nearest neighbors for the perturbation covariance.
    #[arg(long)]
    neighbors: Option<usize>,
    /// Simulations per proposed particle.
    #[arg(long)]
    n_sims: Option<usize>,
    #[arg(long)]
    t_points: Option<usize>,
    #[arg(long)]
    fit_dt: Option<f64>,
    /// Prior draws fixing the first tolerance.
    #[arg(long)]
    pilot_draws: Option<usize>,
    #[arg(long)]
    pilot_quantile: Option<f64>,
    /// Quantile of accepted distances giving the next tolerance.
    #[arg(long)]
    schedule_quantile: Option<f64>,
    /// Per-generation proposal budget, as a multiple of the particle count.
    #[arg(long)]
    budget_factor: Option<usize>,
}

pub fn infer(args: &InferArgs, ctx: &RunContext, out: &mut Outputs) -> Result<ManifestDraft> {
    let cfg = &ctx.config;
    let population = match args.n {
        Some(n) => Some(n),
        None => cfg.get("n")?,
    };
    let tr = load_trace_with_population(&args.trace, population)?;
    let t_points = resolve_t_points(args.t_points, args.fit_dt, cfg, tr.duration())?;
    let observed = ObservedData::from_trace(&tr, t_points)?;

    let defaults = SmcConfig::default();
    let config = SmcConfig {
        n_particles: cfg.resolve(args.particles, "particles", defaults.n_particles)?,
        generations: cfg.resolve(args.generations, "generations", defaults.generations)?,
        neighbors: cfg.resolve(args.neighbors, "neighbors", defaults.neighbors)?,
        n_sims: cfg.resolve(args.n_sims, "n_sims", defaults.n_sims)?,
        pilot_draws: cfg.resolve(args.pilot_draws, "pilot_draws", defaults.pilot_draws)?,
        pilot_quantile: cfg.resolve(args.pilot_quantile, "pilot_quantile", defaults.pilot_quantile)?,
        schedule_quantile: cfg.resolve(
            args.schedule_quantile,
            "schedule_quantile",
            defaults.schedule_quantile,
        )?,
        draw_budget_factor: cfg.resolve(args.budget_factor, "budget_factor", defaults.draw_budget_factor)?,
        seed: ctx.seed,
    };

    let result = abc::abc_smc_mnn(&observed, &config)?;
    out.write_string("populations.csv", &csv_string(|buf| result.write_csv(buf))?)?;

    let last = result.last();
    let summary = abc::posterior_summary(last);
    let intervals: Vec<serde_json::Value> = (0..4)
        .map(|k| {
            json!({
                "param": abc::PARAM_NAMES[k],
                "mean": summary.means[k],
                "std": summary.stds[k],
                "q025": abc::weighted_quantile(last, k, 0.025),
                "q975": abc::weighted_quantile(last, k, 0.975),
            })
        })
        .collect();
    out.write_json(
        "posterior.json",
        &json!({
            "parameters": intervals,
            "dt": observed.dt,
            "r0": abc::r0_from_posterior(&summary).ok(),
            "propagation_speed": trace::propagation_speed(&tr).ok(),
            "high_correlation_pairs": summary.high_correlation_pairs,
            "generations": result.populations.len(),
            "final_epsilon": last.epsilon,
            "final_acceptance_rate": last.acceptance_rate,
        }),
    )?;
    println!(
        "posterior means: beta {:.3}, mu {:.3}, gamma1 {:.3}, gamma2 {:.3}",
        summary.means[0], summary.means[1], summary.means[2], summary.means[3]
    );

    Ok(ManifestDraft::new(
        "infer",
        json!({
            "trace": args.trace.display().to_string(),
            "population": observed.population,
            "t_points": t_points,
            "config": config,
        }),
    ))
}

// ------------------------------------------------------------------- graph

/// Where a graph comes from: an edge list on disk or a seeded generator.
#[derive(Debug, Args)]
pub struct GraphSource {
    /// Edge-list file (whitespace-separated `u v` lines, `#` comments).
    #[arg(long)]
    edgelist: Option<PathBuf>,
    /// Generator: er | ba | ws | cm | sf.
    #[arg(long = "graph")]
    kind: Option<String>,
    /// Node count for generators.
    #[arg(long)]
    n: Option<usize>,
    /// Edge count (er).
    #[arg(long)]
    m: Option<usize>,
    /// Edges added per node (ba).
    #[arg(long)]
    attach: Option<usize>,
    /// Ring degree (ws), even.
    #[arg(long)]
    k: Option<usize>,
    /// Rewire probability (ws).
    #[arg(long)]
    p: Option<f64>,
    /// Power-law exponent (sf).
    #[arg(long)]
    exponent: Option<f64>,
    /// Minimum degree (sf).
    #[arg(long)]
    min_degree: Option<usize>,
    /// Degree sequence file, one integer per line (cm).
    #[arg(long)]
    degrees_file: Option<PathBuf>,
    /// Generator seed (defaults to the run seed).
    #[arg(long)]
    graph_seed: Option<u64>,
}

impl GraphSource {
    fn load(&self, ctx: &RunContext) -> Result<(Graph, serde_json::Value)> {
        let cfg = &ctx.config;
        if let Some(path) = &self.edgelist {
            let (graph, report) = graph::load_edgelist(path)?;
            return Ok((
                graph,
                json!({
                    "source": "edgelist",
                    "path": path.display().to_string(),
                    "dropped_lines": report.dropped,
                }),
            ));
        }
        let kind = cfg.resolve(self.kind.clone(), "graph", String::new())?;
        if kind.is_empty() {
            bail!("give --edgelist or a generator via --graph");
        }
        let seed = match self.graph_seed {
            Some(s) => s,
            None => cfg.get("graph_seed")?.unwrap_or(ctx.seed),
        };
        let n = cfg.resolve(self.n, "n", 1000)?;
        let generator = match kind.as_str() {
            "er" => Generator::ErdosRenyi {
                n,
                edges: cfg
                    .resolve(self.m, "m", 0)
                    .ok()
                    .filter(|m| *m > 0)
                    .ok_or_else(|| anyhow!("er needs --m <edges>"))?,
            },
            "ba" => Generator::BarabasiAlbert { n, attach: cfg.resolve(self.attach, "attach", 2)? },
            "ws" => Generator::WattsStrogatz {
                n,
                ring_degree: cfg.resolve(self.k, "k", 4)?,
                rewire_prob: cfg.resolve(self.p, "p", 0.1)?,
            },
            "cm" => {
                let path = self
                    .degrees_file
                    .clone()
                    .ok_or_else(|| anyhow!("cm needs --degrees-file"))?;
                let degrees = std::fs::read_to_string(&path)
                    .with_context(|| format!("reading {}", path.display()))?
                    .lines()
                    .filter(|l| !l.trim().is_empty())
                    .map(|l| l.trim().parse().with_context(|| format!("degree '{l}'")))
                    .collect::<Result<Vec<usize>>>()?;
                Generator::Configuration { degrees }
            }
            "sf" => Generator::PowerLaw {
                n,
                exponent: cfg.resolve(self.exponent, "exponent", 2.5)?,
                min_degree: cfg.resolve(self.min_degree, "min_degree", 1)?,
            },
            other => bail!("unknown generator '{other}' (er|ba|ws|cm|sf)"),
        };
        let graph = generator.generate(seed)?;
        Ok((graph, json!({ "source": format!("{generator:?}"), "graph_seed": seed })))
    }
}

#[derive(Debug, clap::Subcommand)]
pub enum GraphCommand {
    /// Generate a graph and write its edge list.
    Generate(GraphGenerateArgs),
    /// Topological statistics (Table-style CSV row + JSON).
    Stats(GraphStatsArgs),
    /// Leading adjacency eigenvalue by power iteration.
    Eigen(GraphEigenArgs),
}

#[derive(Debug, Args)]
pub struct GraphGenerateArgs {
    #[command(flatten)]
    source: GraphSource,
}

#[derive(Debug, Args)]
pub struct GraphStatsArgs {
    #[command(flatten)]
    source: GraphSource,
    /// Row label in the CSV output.
    #[arg(long)]
    name: Option<String>,
}

#[derive(Debug, Args)]
pub struct GraphEigenArgs {
    #[command(flatten)]
    source: GraphSource,
    /// Power-iteration convergence tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

pub fn graph(cmd: &GraphCommand, ctx: &RunContext, out: &mut Outputs) -> Result<ManifestDraft> {
    match cmd {
        GraphCommand::Generate(args) => {
            let (graph, source) = args.source.load(ctx)?;
            out.write_string("edgelist.txt", &csv_string(|buf| graph.write_edgelist(buf))?)?;
            out.write_json(
                "graph.json",
                &json!({ "nodes": graph.node_count(), "edges": graph.edge_count() }),
            )?;
            Ok(ManifestDraft::new("graph generate", source))
        }
        GraphCommand::Stats(args) => {
            let (graph, source) = args.source.load(ctx)?;
            let stats = graph::stats(&graph)?;
            let name = args.name.clone().unwrap_or_else(|| "graph".to_string());
            out.write_string(
                "stats.csv",
                &format!("{}\n{}\n", spm_epi_core::graph::GraphStats::CSV_HEADER, stats.csv_row(&name)),
            )?;
            out.write_json("stats.json", &serde_json::to_value(&stats)?)?;
            println!(
                "{name}: n={} m={} lambda_A={:.3} diameter={} components={}",
                stats.nodes, stats.edges, stats.lambda_a, stats.diameter, stats.components
            );
            Ok(ManifestDraft::new("graph stats", json!({ "name": name, "source": source })))
        }
        GraphCommand::Eigen(args) => {
            let (graph, source) = args.source.load(ctx)?;
            let tol = ctx.config.resolve(args.tol, "tol", 1e-8)?;
            let lambda = graph::leading_eigenvalue(&graph, tol)?;
            out.write_json(
                "eigen.json",
                &json!({ "lambda_a": lambda, "tol": tol, "nodes": graph.node_count() }),
            )?;
            println!("lambda_A = {lambda}");
            Ok(ManifestDraft::new("graph eigen", json!({ "tol": tol, "source": source })))
        }
    }
}

// ------------------------------------------------------------------- sweep

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    source: GraphSource,
    /// Threshold values: "start:end:step" or a comma list.
    #[arg(long)]
    s: Option<String>,
    /// Recovery rate (unit step, competing-risks discretization).
    #[arg(long)]
    mu: Option<f64>,
    /// Dormancy rate.
    #[arg(long)]
    gamma1: Option<f64>,
    /// Wake rate.
    #[arg(long)]
    gamma2: Option<f64>,
    /// Realizations per seed.
    #[arg(long)]
    runs: Option<usize>,
    /// Distinct seeds (ensemble per s value = runs × seeds).
    #[arg(long)]
    seeds: Option<usize>,
    /// single | frac=0.05.
    #[arg(long)]
    init: Option<String>,
    /// Safety cap on steps per run.
    #[arg(long)]
    max_steps: Option<usize>,
}

fn parse_s_values(raw: &str) -> Result<Vec<f64>> {
    if let Some((rest, step)) = raw.rsplit_once(':') {
        if let Some((start, end)) = rest.split_once(':') {
            let (start, end, step): (f64, f64, f64) =
                (start.parse()?, end.parse()?, step.parse()?);
            if step <= 0.0 || end < start {
                bail!("bad s range '{raw}'");
            }
            let mut out = Vec::new();
            let mut k = 0;
            loop {
                let v = start + step * k as f64;
                if v > end + 1e-12 {
                    break;
                }
                out.push(v);
                k += 1;
            }
            return Ok(out);
        }
    }
    raw.split(',')
        .map(|v| v.trim().parse().with_context(|| format!("s value '{v}'")))
        .collect()
}

fn parse_init(raw: &str) -> Result<SweepInit> {
    if raw == "single" {
        return Ok(SweepInit::SingleNode);
    }
    if let Some(frac) = raw.strip_prefix("frac=") {
        let f: f64 = frac.parse().with_context(|| format!("init fraction '{frac}'"))?;
        if !(0.0..=1.0).contains(&f) {
            bail!("init fraction must lie in [0, 1]");
        }
        return Ok(SweepInit::Fraction(f));
    }
    bail!("init must be 'single' or 'frac=<f>', got '{raw}'")
}

pub fn sweep(args: &SweepArgs, ctx: &RunContext, out: &mut Outputs) -> Result<ManifestDraft> {
    let cfg = &ctx.config;
    let (graph, source) = args.source.load(ctx)?;
    let s_raw = cfg.resolve(args.s.clone(), "s", "0.25:2.0:0.25".to_string())?;
    let s_values = parse_s_values(&s_raw)?;
    let init_raw = cfg.resolve(args.init.clone(), "init", "single".to_string())?;
    let defaults = SweepConfig::default();
    let config = SweepConfig {
        mu: cfg.resolve(args.mu, "mu", defaults.mu)?,
        gamma1: cfg.resolve(args.gamma1, "gamma1", defaults.gamma1)?,
        gamma2: cfg.resolve(args.gamma2, "gamma2", defaults.gamma2)?,
        runs: cfg.resolve(args.runs, "runs", defaults.runs)?,
        seeds: cfg.resolve(args.seeds, "seeds", defaults.seeds)?,
        base_seed: ctx.seed,
        init: parse_init(&init_raw)?,
        max_steps: cfg.resolve(args.max_steps, "max_steps", defaults.max_steps)?,
    };

    let rows = phase_transition_sweep(&graph, &s_values, &config)?;
    out.write_string(
        "sweep.csv",
        &csv_string(|buf| spm_epi_core::nlds::write_sweep_csv(&rows, buf))?,
    )?;

    Ok(ManifestDraft::new(
        "sweep",
        json!({
            "source": source, "s": s_values, "config": config, "init": init_raw,
            "nodes": graph.node_count(), "edges": graph.edge_count(),
        }),
    ))
}
