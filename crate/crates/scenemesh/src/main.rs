use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use scenemesh::config::{ModeSetting, WorldPreset};
use scenemesh::{run_with_jobs, Overrides, Pipeline, PipelineConfig, PipelineError, Stage};

/// Multi-scene activity modelling pipeline.
#[derive(Debug, Parser)]
#[command(name = "scenemesh", version)]
struct Cli {
    /// Stage to run.
    #[arg(value_enum)]
    stage: Stage,
    /// JSON configuration file; missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run directory for all artifacts.
    #[arg(long)]
    run_dir: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for per-scene work (0 = one per core).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Synthetic world to generate.
    #[arg(long, value_enum)]
    preset: Option<WorldPreset>,
    /// Topics per local scene model.
    #[arg(long)]
    k_local: Option<usize>,
    /// Shared basis size per scene.
    #[arg(long)]
    coeff: Option<usize>,
    /// Number of scene clusters, or "auto".
    #[arg(long, value_parser = parse_clusters)]
    clusters: Option<ModeSetting>,
    /// Seeds averaged by the summary study.
    #[arg(long)]
    summary_seeds: Option<usize>,
    /// Subsample runs of the stability study.
    #[arg(long)]
    stability_runs: Option<usize>,
}

fn parse_clusters(s: &str) -> Result<ModeSetting, String> {
    if s == "auto" {
        return Ok(ModeSetting::Auto);
    }
    s.parse()
        .map(ModeSetting::Fixed)
        .map_err(|_| format!("expected \"auto\" or a count, got {s:?}"))
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    cfg.apply(&Overrides {
        run_dir: cli.run_dir.clone(),
        seed: cli.seed,
        preset: cli.preset,
        k_local: cli.k_local,
        coeff: cli.coeff,
        clusters: cli.clusters,
        summary_seeds: cli.summary_seeds,
        stability_runs: cli.stability_runs,
    });
    let pipeline = Pipeline::new(cfg)?;
    run_with_jobs(&pipeline, cli.stage, cli.jobs)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SCENEMESH_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("scenemesh: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
