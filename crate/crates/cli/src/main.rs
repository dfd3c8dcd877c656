use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use geomatch::estimators::EstimatorConfig;
use geomatch::harness::{
    demo_config, run_sweep_to_file, summarize, write_csv, SigmaGrid, SweepConfig, SweepRecord,
};
use geomatch::theory::{thresholds, verify_suite};
use geomatch::ModelKind;

#[derive(Parser)]
#[command(name = "geomatch", version, about = "Recover the matching between two noisy point clouds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a σ-sweep described by a JSON config and/or flags.
    Sweep(SweepArgs),
    /// Overlap-vs-σ sweep of the linear and dot-product models.
    Demo(DemoArgs),
    /// Cross-check the closed-form results against independent oracles.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Monte-Carlo samples per MGF configuration.
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
    },
    /// Print the recovery thresholds for (n, d, σ).
    Thresholds {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        sigma: f64,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
    },
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    sigma_min: Option<f64>,
    #[arg(long)]
    sigma_max: Option<f64>,
    #[arg(long)]
    sigma_points: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated model names.
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<ModelKind>>,
    /// Comma-separated estimator names (`_greedy` suffix for greedy rounding).
    #[arg(long, value_delimiter = ',')]
    estimators: Option<Vec<EstimatorConfig>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// CSV output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record wall-clock runtimes (output is then not reproducible).
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    timing: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Sweep(args) => {
            let cfg = sweep_config(args)?;
            execute(&cfg)?;
        }
        Command::Demo(args) => {
            let mut cfg = demo_config(args.n, args.d);
            if let Some(t) = args.trials {
                cfg.trials = t;
            }
            if let Some(s) = args.seed {
                cfg.base_seed = s;
            }
            if let Some(w) = args.workers {
                cfg.workers = w;
            }
            cfg.output_path = args.out;
            cfg.record_runtime = args.timing;
            execute(&cfg)?;
        }
        Command::Verify { seed, samples } => {
            let checks = verify_suite(seed, samples)?;
            let mut failed = 0;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                failed += usize::from(!c.passed);
            }
            if failed > 0 {
                println!("{failed} of {} checks failed", checks.len());
                return Ok(ExitCode::FAILURE);
            }
            println!("all {} checks passed", checks.len());
        }
        Command::Thresholds { n, d, sigma, eps } => {
            println!("{}", serde_json::to_string_pretty(&thresholds(n, d, sigma, eps)?)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn sweep_config(a: SweepArgs) -> Result<SweepConfig> {
    let mut cfg = match &a.config {
        Some(p) => SweepConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => {
            let (Some(n), Some(d), Some(est)) = (a.n, a.d, a.estimators.clone()) else {
                bail!("without --config, --n, --d and --estimators are required");
            };
            SweepConfig::new(n, d, ModelKind::ALL.to_vec(), est)
        }
    };
    if let Some(n) = a.n {
        cfg.n = n;
    }
    if let Some(d) = a.d {
        cfg.d = d;
    }
    if a.sigma_min.is_some() || a.sigma_max.is_some() || a.sigma_points.is_some() {
        let (min, max, points) = match cfg.sigma_grid.clone().unwrap_or(SigmaGrid::default_for(cfg.n, cfg.d)) {
            SigmaGrid::LogSpaced { min, max, points } => (min, max, points),
            SigmaGrid::List(v) => (v[0], v[v.len() - 1], v.len()),
        };
        cfg.sigma_grid = Some(SigmaGrid::LogSpaced {
            min: a.sigma_min.unwrap_or(min),
            max: a.sigma_max.unwrap_or(max),
            points: a.sigma_points.unwrap_or(points),
        });
    }
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(m) = a.models {
        cfg.models = m;
    }
    if let Some(e) = a.estimators {
        cfg.estimators = e;
    }
    if let Some(s) = a.seed {
        cfg.base_seed = s;
    }
    if let Some(w) = a.workers {
        cfg.workers = w;
    }
    if a.out.is_some() {
        cfg.output_path = a.out;
    }
    cfg.record_runtime |= a.timing;
    Ok(cfg)
}

fn execute(cfg: &SweepConfig) -> Result<()> {
    let records = match run_sweep_to_file(cfg) {
        Ok(r) => r,
        Err(partial) if !partial.records.is_empty() => {
            print_csv(&partial.records)?;
            return Err(partial.source).context("results were written to stdout instead");
        }
        Err(partial) => return Err(partial.source.into()),
    };
    match &cfg.output_path {
        Some(p) => eprintln!("wrote {} records to {}", records.len(), p.display()),
        None => print_csv(&records)?,
    }
    if !records.is_empty() {
        for s in summarize(&records)? {
            eprintln!("{s}");
        }
    }
    Ok(())
}

fn print_csv(records: &[SweepRecord]) -> Result<()> {
    write_csv(records, std::io::stdout().lock())?;
    Ok(())
}
