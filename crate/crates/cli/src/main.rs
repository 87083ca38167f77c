//! `blk`: emergency-demand analysis pipeline.

mod config;
mod context;
mod manifest;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context as _;
use bluelight_core::oracle::{generate_dataset, write_dataset, Scenario};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::{ConfigError, Overrides};
use context::Context;
use manifest::Recorder;
use stages::Stage;

#[derive(Parser, Debug)]
#[command(name = "blk", version, about = "Spatio-temporal analysis of emergency incident demand")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load, clip and aggregate incidents; write counts, series and profiles.
    Ingest(RunArgs),
    /// STL decomposition of each demand series.
    Decompose(RunArgs),
    /// SARIMAX order search and OLS baseline with weather regressors.
    Fit(RunArgs),
    /// Global bivariate Moran's I between LAS and LFB counts.
    Moran(RunArgs),
    /// Local bivariate Moran clusters.
    Lisa(RunArgs),
    /// Geographically weighted regression of demand on area covariates.
    Gwr(RunArgs),
    /// Kernel density surfaces of incident locations.
    Kde(RunArgs),
    /// Conditional density maps faceted by time of occurrence.
    Comap(RunArgs),
    /// Bivariate tertile classes and borough priority ranking.
    Rank(RunArgs),
    /// Choropleth maps and demand charts.
    Render(RunArgs),
    /// Every stage in order.
    Pipeline(RunArgs),
    /// Write a synthetic dataset from a scenario file.
    Synth {
        /// Scenario JSON.
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Replaces the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// Pipeline configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, env = "BLK_THREADS")]
    threads: Option<usize>,
    /// Permutations for Moran and LISA inference.
    #[arg(long)]
    n_perm: Option<usize>,
    /// Kernel bandwidth: the GWR bandwidth for `gwr`, otherwise the KDE
    /// radius in degrees.
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Fixed GWR bandwidth (neighbours when adaptive, else map units).
    #[arg(long)]
    gwr_bandwidth: Option<f64>,
    /// Model log(1 + count) in GWR.
    #[arg(long)]
    log1p: bool,
    /// Seasonal period: 52 for weekly buckets, 12 for monthly.
    #[arg(long = "s", value_name = "PERIOD")]
    period: Option<usize>,
}

enum Failure {
    Config(ConfigError),
    Stage(serde_json::Value),
    Other(anyhow::Error),
}

fn run(name: &str, stages: &[Stage], args: &RunArgs) -> Result<(), Failure> {
    let gwr_only = stages == [Stage::Gwr];
    let overrides = Overrides {
        out: args.out.clone(),
        seed: args.seed,
        n_perm: args.n_perm,
        bandwidth: args.bandwidth.filter(|_| !gwr_only),
        gwr_bandwidth: args.gwr_bandwidth.or(args.bandwidth.filter(|_| gwr_only)),
        log1p: args.log1p,
        period: args.period,
    };
    if args.threads == Some(0) {
        return Err(Failure::Config(ConfigError::new("--threads", "must be at least 1")));
    }
    let cfg = config::load(&args.config, &overrides).map_err(Failure::Config)?;
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Other(e.into()))?;
    }
    let out = cfg.out.clone();
    std::fs::create_dir_all(&out)
        .with_context(|| format!("creating {}", out.display()))
        .map_err(Failure::Other)?;
    let _ = std::fs::remove_file(out.join("error.json"));
    let seed = cfg.config.seed;
    let hash = cfg.hash();
    // later stages never run after a failure; the error is left next to
    // whatever the earlier stages wrote
    let fail = |stage: &str, e: anyhow::Error| {
        let body = json!({ "stage": stage, "error": format!("{e:#}") });
        let _ = std::fs::write(out.join("error.json"), format!("{body:#}\n"));
        Failure::Stage(body)
    };
    let mut rec = Recorder::new(out.clone());
    let ctx = Context::load(cfg, &mut rec).map_err(|e| fail("load", e))?;
    for stage in stages {
        stage.run(&ctx, &mut rec).map_err(|e| fail(stage.name(), e))?;
        eprintln!("{stage}: done");
    }
    let m = rec.finish(name, seed, hash).map_err(Failure::Other)?;
    println!("{}: {} artifacts in {}", name, m.outputs.len(), out.display());
    Ok(())
}

fn synth(scenario: &PathBuf, out: &PathBuf, seed: Option<u64>) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(scenario).with_context(|| format!("reading {}", scenario.display()))?;
    let mut s = Scenario::from_json(&text)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    let d = generate_dataset(&s)?;
    let paths = write_dataset(&d, out)?;
    println!("{} incidents, {} areas -> {}", d.incidents.len(), d.areas.len(), paths.incidents.parent().unwrap_or(out).display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, stages, args) = match &cli.command {
        Command::Synth { scenario, out, seed } => {
            return match synth(scenario, out, *seed) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("{}", json!({ "stage": "synth", "error": format!("{e:#}") }));
                    ExitCode::FAILURE
                }
            };
        }
        Command::Pipeline(a) => ("pipeline", Stage::ALL.to_vec(), a),
        Command::Ingest(a) => ("ingest", vec![Stage::Ingest], a),
        Command::Decompose(a) => ("decompose", vec![Stage::Decompose], a),
        Command::Fit(a) => ("fit", vec![Stage::Fit], a),
        Command::Moran(a) => ("moran", vec![Stage::Moran], a),
        Command::Lisa(a) => ("lisa", vec![Stage::Lisa], a),
        Command::Gwr(a) => ("gwr", vec![Stage::Gwr], a),
        Command::Kde(a) => ("kde", vec![Stage::Kde], a),
        Command::Comap(a) => ("comap", vec![Stage::Comap], a),
        Command::Rank(a) => ("rank", vec![Stage::Rank], a),
        Command::Render(a) => ("render", vec![Stage::Render], a),
    };
    match run(name, &stages, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("{}", json!({ "error": "invalid_config", "field": e.field, "message": e.message }));
            ExitCode::from(2)
        }
        Err(Failure::Stage(body)) => {
            eprintln!("{body}");
            ExitCode::FAILURE
        }
        Err(Failure::Other(e)) => {
            eprintln!("{}", json!({ "error": format!("{e:#}") }));
            ExitCode::FAILURE
        }
    }
}
