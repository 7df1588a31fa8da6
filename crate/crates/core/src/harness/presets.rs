//! Built-in acceptance runs, one or more per criterion. The CLI runs them with
//! `--acceptance`; the acceptance test runs the same configs.

use super::config::{CouplingKind, Experiment, Grid, RenormKind, RunConfig, StatsKind};

#[derive(Clone, Debug, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub criterion: u32,
    /// Measured on one core.
    pub expected_runtime: &'static str,
    pub config: RunConfig,
}

fn base(experiment: Experiment, replicas: u64, seed: u64) -> RunConfig {
    let mut c = RunConfig::new(experiment, vec![0.25], vec![0.75], replicas);
    c.seed = seed;
    c
}

fn grid<T: Clone>(xs: &[T]) -> Grid<T> {
    Grid(xs.to_vec())
}

fn stats(kind: StatsKind, replicas: u64, seed: u64) -> RunConfig {
    let mut c = base(Experiment::Stats, replicas, seed);
    c.stats_kind = Some(kind);
    c
}

fn renorm(kind: RenormKind, replicas: u64, seed: u64) -> RunConfig {
    let mut c = base(Experiment::Renorm, replicas, seed);
    c.renorm_kind = Some(kind);
    c
}

pub fn all() -> Vec<Preset> {
    let mut v = Vec::new();
    let mut push = |name, criterion, expected_runtime, config| v.push(Preset { name, criterion, expected_runtime, config });

    let mut c = stats(StatsKind::Invariant, 1000, 101);
    c.rho = grid(&[1.0]);
    c.horizon = grid(&[20.0]);
    c.interior = Some([1, 100]);
    push("invariant", 1, "1 s", c);

    let mut c = stats(StatsKind::Drift, 10_000, 102);
    c.horizon = grid(&[1000.0]);
    push("drift", 2, "1 s", c);

    let mut c = base(Experiment::FrontSweep, 200, 103);
    c.rho = grid(&[0.05]);
    c.horizon = grid(&[100.0, 200.0]);
    c.threshold_speed = Some(-0.25);
    push("small-density", 3, "1 s", c);

    let mut c = base(Experiment::FrontSweep, 200, 104);
    c.rho = grid(&[6.0]);
    c.horizon = grid(&[200.0]);
    c.threshold_speed = Some(0.05);
    // the infected set spreads left at about 4 sites per unit time
    c.speed_bound = 6.0;
    push("large-density", 4, "5 min", c);

    let mut c = base(Experiment::GipStats, 100, 105);
    c.rho = grid(&[1.0]);
    c.horizon = grid(&[20.0]);
    c.gip_check = true;
    push("gip-soundness", 5, "2 s", c);

    let mut c = base(Experiment::Couple, 1000, 106);
    c.coupling = Some(CouplingKind::Monotone);
    c.rho_low = Some(0.5);
    c.rho = grid(&[1.0]);
    c.horizon = grid(&[50.0]);
    push("monotone", 6, "10 s", c);

    let mut c = base(Experiment::Couple, 200, 107);
    c.coupling = Some(CouplingKind::Sprinkled);
    c.rho = grid(&[1.0]);
    c.horizon = grid(&[500.0, 2000.0]);
    c.target = Some([1, 20]);
    push("sprinkled", 7, "5 min", c);

    let mut c = base(Experiment::Decouple, 10_000, 108);
    c.rho = grid(&[1.0]);
    c.side = Some(4);
    c.gap = grid(&[100.0]);
    c.probes = vec!["at_most:4".into(), "empty_throughout".into()];
    push("decouple", 8, "11 s", c);

    let mut c = stats(StatsKind::PoissonTail, 1, 109);
    c.rho = grid(&[0.5, 1.0, 2.0, 4.0]);
    c.thresholds = (0..=50).collect();
    push("poisson-tail", 9, "1 s", c);

    let mut c = stats(StatsKind::Kernel, 1, 109);
    c.horizon = grid(&[16.0, 64.0, 256.0]);
    push("kernel-mass", 9, "1 s", c);

    let mut c = stats(StatsKind::KernelMc, 200_000, 109);
    c.horizon = grid(&[64.0]);
    c.points = vec![vec![-40], vec![-32], vec![-28], vec![-20]];
    push("kernel-mc", 9, "1 s", c);

    let mut c = stats(StatsKind::Meeting, 100_000, 109);
    c.horizon = grid(&[16.0, 64.0]);
    c.points = vec![vec![0], vec![2], vec![5]];
    push("meeting", 9, "1 s", c);

    let mut c = stats(StatsKind::Floors, 1, 109);
    c.horizon = grid(&[16.0, 64.0, 256.0]);
    push("floors", 9, "1 s", c);

    let mut c = renorm(RenormKind::Ladder, 1, 110);
    c.l0 = grid(&[2, 3, 4]);
    c.k_max = Some(1);
    push("ladder", 10, "1 s", c);

    let mut c = renorm(RenormKind::Monotonicity, 200, 110);
    c.l0 = grid(&[2, 4]);
    c.rho = grid(&[2.0]);
    c.rho_low = Some(1.0);
    push("box-monotone", 10, "1 s", c);

    let mut c = renorm(RenormKind::Monotonicity, 5, 110);
    c.l0 = grid(&[2]);
    c.k = 1;
    c.rho = grid(&[1.5]);
    c.rho_low = Some(0.75);
    push("box-monotone-k1", 10, "2 s", c);

    let mut c = renorm(RenormKind::BoxEvents, 200, 110);
    c.l0 = grid(&[2, 4]);
    push("box-events", 10, "1 s", c);

    let mut c = renorm(RenormKind::BoxEvents, 10, 110);
    c.l0 = grid(&[2]);
    c.k = 1;
    push("box-events-k1", 10, "6 s", c);

    let mut c = renorm(RenormKind::Trigger, 200, 110);
    c.scales = grid(&[4, 9, 16, 25]);
    push("trigger", 10, "7 s", c);

    v
}

/// Presets of one experiment.
pub fn for_experiment(e: Experiment) -> Vec<Preset> {
    all().into_iter().filter(|p| p.config.experiment == e).collect()
}

pub fn by_name(name: &str) -> Option<Preset> {
    all().into_iter().find(|p| p.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid_and_named_uniquely() {
        let all = all();
        let mut names: Vec<_> = all.iter().map(|p| p.name).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), all.len());
        for p in &all {
            super::super::plan(&p.config).unwrap_or_else(|e| panic!("{}: {e}", p.name));
            let back = RunConfig::from_toml(&p.config.to_toml()).unwrap();
            assert_eq!(back, p.config, "{}", p.name);
        }
        assert!((1..=10).all(|c| all.iter().any(|p| p.criterion == c)));
    }
}
