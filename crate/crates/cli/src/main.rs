use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use scbm::datasets::Task;
use scbm::experiment::{
    load_raw_metrics, run_direct_baseline, run_grid_with, write_baselines, write_bundle, write_plots, write_tables,
    ExperimentConfig, GridSpec, Metric,
};
use scbm::verify::run_all_suites;

#[derive(Parser)]
#[command(name = "scbm", version, about = "Concept bottleneck models with an abstaining sidecar")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate the full experiment grid.
    Run(Common),
    /// Train the backbone directly on target labels.
    Baseline(Common),
    /// Rebuild the metric tables from an existing raw_metrics.csv.
    Tables(Common),
    /// Rebuild the accuracy plots from an existing raw_metrics.csv.
    Plot(Common),
    /// Run the oracle and property suites.
    Verify(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data_root: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated dataset ids.
    #[arg(long, value_delimiter = ',')]
    datasets: Option<Vec<String>>,
    /// Comma-separated missingness probabilities.
    #[arg(long, value_delimiter = ',')]
    p_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    /// Number of grid units trained in parallel.
    #[arg(long)]
    jobs: Option<usize>,
    /// Use only the first N training images.
    #[arg(long)]
    train_limit: Option<usize>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::from_env(),
        };
        if let Some(v) = &self.data_root {
            cfg.data_root = v.clone();
        }
        if let Some(v) = &self.out {
            cfg.output_dir = v.clone();
        }
        if let Some(v) = &self.datasets {
            cfg.datasets = v.iter().map(|s| s.parse::<Task>()).collect::<Result<_, _>>()?;
        }
        if let Some(v) = &self.p_grid {
            cfg.p_grid = v.clone();
        }
        if let Some(v) = &self.seeds {
            cfg.seeds = v.clone();
        }
        if let Some(v) = self.epsilon {
            cfg.epsilon = v;
        }
        if let Some(v) = self.tau {
            cfg.tau = v;
        }
        if let Some(v) = self.jobs {
            cfg.jobs = v;
        }
        if let Some(v) = self.train_limit {
            cfg.train_limit = Some(v);
        }
        cfg.sync_training();
        cfg.validate()?;
        Ok(cfg)
    }
}

fn progress(start: Instant) -> impl Fn(&str) + Sync {
    move |msg: &str| eprintln!("[{:>6.0}s] {msg}", start.elapsed().as_secs_f64())
}

fn print_paths(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn spec_for(args: &Common, cfg: &ExperimentConfig, raw: &[scbm::evaluation::RunMetrics]) -> GridSpec {
    if args.config.is_some() || args.datasets.is_some() || args.p_grid.is_some() {
        GridSpec::from_config(cfg)
    } else {
        GridSpec::from_raw(raw)
    }
}

fn run(args: &Common) -> Result<()> {
    let cfg = args.config()?;
    let start = Instant::now();
    let bundle = run_grid_with(&cfg, &progress(start))?;
    print_paths(&write_bundle(&bundle, &cfg.output_dir)?);
    let spec = GridSpec::from_config(&cfg);
    for metric in Metric::ALL {
        println!("\n{}", scbm::experiment::render_markdown(&spec, &bundle.cells, metric)?);
    }
    Ok(())
}

fn baseline(args: &Common) -> Result<()> {
    let cfg = args.config()?;
    let start = Instant::now();
    let report = progress(start);
    let results = cfg
        .datasets
        .iter()
        .map(|&t| run_direct_baseline(&cfg, t, &report))
        .collect::<Result<Vec<_>, _>>()?;
    std::fs::create_dir_all(&cfg.output_dir).with_context(|| cfg.output_dir.display().to_string())?;
    print_paths(&write_baselines(&cfg.output_dir, &results)?);
    for r in &results {
        println!("{}: {}", r.dataset.display_name(), r.summary.display());
    }
    Ok(())
}

fn rebuild(args: &Common, tables: bool) -> Result<()> {
    let cfg = args.config()?;
    let dir: &Path = &cfg.output_dir;
    let raw = load_raw_metrics(dir)?;
    let spec = spec_for(args, &cfg, &raw);
    let cells = spec.aggregate(&raw)?;
    let written = if tables {
        write_tables(dir, &spec, &cells)?
    } else {
        write_plots(dir, &spec, &cells)?
    };
    print_paths(&written);
    Ok(())
}

fn verify(args: &Common) -> Result<()> {
    let cfg = args.config()?;
    let report = run_all_suites(Some(&cfg.data_root));
    for line in &report {
        println!("{line}");
    }
    if report.iter().any(|r| !r.passed) {
        bail!("verification failed");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => run(a),
        Command::Baseline(a) => baseline(a),
        Command::Tables(a) => rebuild(a, true),
        Command::Plot(a) => rebuild(a, false),
        Command::Verify(a) => verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
