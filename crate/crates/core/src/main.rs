use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use geoclass::config::PipelineConfig;
use geoclass::error::{Error, Result};
use geoclass::pipeline::{self, Stage};

#[derive(Parser)]
#[command(name = "geoclass", version, about = "Geodemographic classification of district-level census data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// INI configuration file.
    #[arg(long, short)]
    config: PathBuf,
    /// Master seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Number of clusters (overrides the config and skips k selection in run-all).
    #[arg(long)]
    k: Option<usize>,
    /// K-means restarts for the final fit.
    #[arg(long)]
    restarts: Option<usize>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest, reconstruct suppressed cells, standardize and prune.
    ValidateInput(Common),
    /// Fit K-means with restarts.
    Fit(Common),
    /// Gap statistic and clustergram.
    Kselect(Common),
    /// ANOVA F, cluster sizes, distance boxplots.
    Evaluate(Common),
    /// Pen portraits and at-risk flags.
    Profile(Common),
    /// Compare clusters with broadband performance and internet usage data.
    ExternalValidate(Common),
    /// Attach cluster attributes to boundary polygons.
    ExportGeojson(Common),
    /// Every stage in order.
    RunAll(Common),
}

fn config(c: &Common) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::load(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = Some(s);
    }
    if let Some(k) = c.k {
        cfg.k = Some(k);
    }
    if let Some(r) = c.restarts {
        cfg.restarts = r;
    }
    if let Some(o) = &c.out_dir {
        cfg.out_dir = o.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let (common, stage) = match &cli.command {
        Command::ValidateInput(c) => (c, Some(Stage::ValidateInput)),
        Command::Fit(c) => (c, Some(Stage::Fit)),
        Command::Kselect(c) => (c, Some(Stage::KSelect)),
        Command::Evaluate(c) => (c, Some(Stage::Evaluate)),
        Command::Profile(c) => (c, Some(Stage::Profile)),
        Command::ExternalValidate(c) => (c, Some(Stage::ExternalValidate)),
        Command::ExportGeojson(c) => (c, Some(Stage::ExportGeojson)),
        Command::RunAll(c) => (c, None),
    };
    let cfg = config(common)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = common.threads {
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let manifest = pool.install(|| match stage {
        Some(s) => pipeline::run_stages(&cfg, &[s], false),
        None => pipeline::run_all(&cfg),
    })?;
    for s in &manifest.stages {
        log::info!("{:<18} {:>8.2}s", s.stage, s.seconds);
    }
    println!("outputs written to {}", cfg.out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
