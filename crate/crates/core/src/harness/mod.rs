//! Configuration, orchestration and persistence of experiment runs.
//!
//! A run validates its whole grid before any simulation starts, farms
//! replicas over a worker pool, aggregates on one thread in replica order,
//! and writes one directory with `manifest.json`, CSV tables and SVG charts.
//! Every CSV byte is a function of the config and the seed.

pub mod config;
mod couple;
pub mod csv;
mod front;
pub mod manifest;
pub mod plot;
pub mod presets;
mod renorm_cmd;
mod stats_cmd;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde_json::{Map, Value};

pub use config::{CouplingKind, Experiment, Grid, RenormKind, RunConfig, StatsKind};
pub use csv::{fmt_g9, Table};
pub use manifest::{RunManifest, SeedRecord, TruncationDiagnostics};
pub use plot::{Plot, Series};

use crate::engine::RandomSource;
use crate::error::{Error, Result};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "DRIFTLAB_OUT";

/// Expected walk jumps a run may need before it requires `--acceptance`.
pub const JUMP_BUDGET: f64 = 5e8;

/// Everything a command produces before it is written out.
#[derive(Default)]
pub struct Report {
    pub tables: Vec<(String, Table)>,
    pub plots: Vec<(String, Plot)>,
    pub seeds: Vec<SeedRecord>,
    pub truncation: TruncationDiagnostics,
    pub warnings: Vec<String>,
    pub summary: Map<String, Value>,
}

impl Report {
    fn table(&mut self, name: &str, t: Table) {
        self.tables.push((name.into(), t));
    }
}

/// A validated run waiting to execute.
pub(crate) struct Plan {
    /// Expected number of walk jumps.
    pub cost: f64,
    pub job: Box<dyn FnOnce() -> Result<Report> + Send>,
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    /// Lift the jump budget for long acceptance sweeps.
    pub acceptance: bool,
}

pub struct RunOutput {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub tables: Vec<(String, Table)>,
}

impl RunOutput {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn summary(&self) -> &Value {
        &self.manifest.summary
    }
}

/// The stream of one grid point, named by its parameters so that growing a
/// grid leaves the other points unchanged.
pub(crate) fn unit_source(cfg: &RunConfig, unit: &str) -> RandomSource {
    RandomSource::new(cfg.seed).derive_label(cfg.experiment.name()).derive_label(unit)
}

/// Run `f` on every replica stream of `source`; results come back in replica order.
pub fn farm<T, F>(replicas: u64, source: &RandomSource, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&RandomSource) -> Result<T> + Sync,
{
    (0..replicas).into_par_iter().map(|r| f(&source.replica(r))).collect()
}

pub fn out_dir(cfg: &RunConfig, cli: Option<&Path>) -> PathBuf {
    if let Some(p) = cli {
        return p.to_path_buf();
    }
    if let Some(p) = &cfg.out_dir {
        return PathBuf::from(p);
    }
    let root = std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"));
    root.join(format!("{}-seed{}", cfg.experiment, cfg.seed))
}

pub(crate) fn plan(cfg: &RunConfig) -> Result<Plan> {
    let law = cfg.check_common()?;
    match cfg.experiment {
        Experiment::FrontSweep => front::plan_front(cfg, law),
        Experiment::GipStats => front::plan_gip(cfg, law),
        Experiment::Couple => couple::plan_couple(cfg, law),
        Experiment::Decouple => couple::plan_decouple(cfg, law),
        Experiment::Renorm => renorm_cmd::plan(cfg, law),
        Experiment::Stats => stats_cmd::plan(cfg, law),
    }
}

/// Validate, execute and persist one run.
pub fn run(config: &RunConfig, opts: &RunOptions) -> Result<RunOutput> {
    let mut cfg = config.clone();
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    let plan = plan(&cfg)?;
    if !opts.acceptance && plan.cost > JUMP_BUDGET {
        return Err(Error::Config(format!(
            "run needs about {:.2e} walk jumps, above the {JUMP_BUDGET:.0e} budget; pass --acceptance to run it",
            plan.cost
        )));
    }
    let dir = out_dir(&cfg, opts.out.as_deref());
    let start = Instant::now();
    let report = match cfg.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?
            .install(plan.job),
        None => (plan.job)(),
    }?;
    std::fs::create_dir_all(&dir)?;
    let mut files = Vec::new();
    for (name, t) in &report.tables {
        let f = format!("{name}.csv");
        std::fs::write(dir.join(&f), t.to_bytes())?;
        files.push(f);
    }
    for (name, p) in &report.plots {
        let f = format!("{name}.svg");
        std::fs::write(dir.join(&f), p.to_svg())?;
        files.push(f);
    }
    let manifest = RunManifest {
        config: cfg,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_secs: start.elapsed().as_secs_f64(),
        seeds: report.seeds,
        truncation: report.truncation,
        warnings: report.warnings,
        files,
        summary: Value::Object(report.summary),
    };
    manifest.save(&dir.join("manifest.json"))?;
    Ok(RunOutput { dir, manifest, tables: report.tables })
}

/// Repeat the run recorded in `manifest` into `out`.
pub fn rerun(manifest: &Path, out: &Path) -> Result<RunOutput> {
    let m = RunManifest::load(manifest)?;
    run(&m.config, &RunOptions { seed: None, out: Some(out.to_path_buf()), acceptance: true })
}

/// Nearest-rank quantile of sorted data.
pub(crate) fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let i = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[i - 1]
}

/// Mean and normal-approximation interval.
pub(crate) fn mean_ci(xs: &[f64], level: f64) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    let h = crate::stats::z_for_level(level) * (var / n).sqrt();
    (mean, mean - h, mean + h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.0);
        assert_eq!(quantile(&v, 0.9), 4.0);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert!(quantile(&[], 0.5).is_nan());
    }

    #[test]
    fn output_root_precedence() {
        let mut c = RunConfig::new(Experiment::Stats, vec![0.25], vec![0.75], 1);
        c.seed = 3;
        assert_eq!(out_dir(&c, Some(Path::new("x"))), PathBuf::from("x"));
        c.out_dir = Some("y".into());
        assert_eq!(out_dir(&c, None), PathBuf::from("y"));
        c.out_dir = None;
        assert!(out_dir(&c, None).ends_with("stats-seed3"));
    }
}
