use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};
use driftlab::harness::{self, presets, Experiment, RunConfig, RunManifest, RunOptions, RunOutput};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    FrontSweep,
    GipStats,
    Couple,
    Decouple,
    Renorm,
    Stats,
}

impl From<Command> for Experiment {
    fn from(c: Command) -> Self {
        match c {
            Command::FrontSweep => Experiment::FrontSweep,
            Command::GipStats => Experiment::GipStats,
            Command::Couple => Experiment::Couple,
            Command::Decouple => Experiment::Decouple,
            Command::Renorm => Experiment::Renorm,
            Command::Stats => Experiment::Stats,
        }
    }
}

/// Simulate infection spread among biased random walks and write CSV tables,
/// SVG charts and a manifest for each run.
#[derive(Debug, Parser)]
#[command(name = "driftlab", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// TOML run config, or a manifest.json to repeat a recorded run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: $DRIFTLAB_OUT/<experiment>-seed<N>, or runs/...).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Allow long runs. Without --config, run the built-in acceptance presets
    /// for the command.
    #[arg(long)]
    acceptance: bool,
}

fn load(path: &Path) -> Result<RunConfig> {
    if path.extension().is_some_and(|e| e == "json") {
        Ok(RunManifest::load(path).with_context(|| format!("reading manifest {}", path.display()))?.config)
    } else {
        RunConfig::load(path).with_context(|| format!("reading config {}", path.display()))
    }
}

fn report(out: &RunOutput) {
    println!("wrote {} ({:.1} s)", out.dir.display(), out.manifest.wall_time_secs);
    for f in &out.manifest.files {
        println!("  {f}");
    }
    for w in &out.manifest.warnings {
        eprintln!("warning: {w}");
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let experiment = Experiment::from(cli.command);
    let opts = RunOptions { seed: cli.seed, out: cli.out.clone(), acceptance: cli.acceptance };
    match &cli.config {
        Some(path) => {
            let cfg = load(path)?;
            if cfg.experiment != experiment {
                bail!("config is for `{}`, not `{experiment}`", cfg.experiment);
            }
            report(&harness::run(&cfg, &opts)?);
        }
        None if cli.acceptance => {
            let root = cli.out.clone().unwrap_or_else(|| harness::out_dir(&presets::for_experiment(experiment)[0].config, None));
            for p in presets::for_experiment(experiment) {
                println!("criterion {}: {} (expected {})", p.criterion, p.name, p.expected_runtime);
                let opts = RunOptions { out: Some(root.join(p.name)), ..opts.clone() };
                report(&harness::run(&p.config, &opts)?);
            }
        }
        None => bail!("--config is required unless --acceptance is given"),
    }
    Ok(())
}
