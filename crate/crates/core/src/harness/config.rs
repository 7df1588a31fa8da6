//! Run configuration: one flat TOML table with typed keys. Unknown keys are
//! rejected. Times are in units of the walks' mean holding time; lengths are
//! in lattice steps.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::coupling::Probe;
use crate::error::{Error, Result};
use crate::lattice::JumpDistribution;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    FrontSweep,
    GipStats,
    Couple,
    Decouple,
    Renorm,
    Stats,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::FrontSweep,
        Experiment::GipStats,
        Experiment::Couple,
        Experiment::Decouple,
        Experiment::Renorm,
        Experiment::Stats,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::FrontSweep => "front-sweep",
            Experiment::GipStats => "gip-stats",
            Experiment::Couple => "couple",
            Experiment::Decouple => "decouple",
            Experiment::Renorm => "renorm",
            Experiment::Stats => "stats",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingKind {
    Monotone,
    Sprinkled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RenormKind {
    Ladder,
    BoxEvents,
    Monotonicity,
    Trigger,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatsKind {
    Invariant,
    Drift,
    PoissonTail,
    Kernel,
    KernelMc,
    Meeting,
    Floors,
    Deviation,
    Mushroom,
}

/// A value or a list of values; a bare number is a one-point grid.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "OneOrMany<T>", into = "Vec<T>")]
pub struct Grid<T: Clone>(pub Vec<T>);

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> From<OneOrMany<T>> for Grid<T> {
    fn from(v: OneOrMany<T>) -> Self {
        match v {
            OneOrMany::One(x) => Grid(vec![x]),
            OneOrMany::Many(xs) => Grid(xs),
        }
    }
}

impl<T: Clone> From<Grid<T>> for Vec<T> {
    fn from(g: Grid<T>) -> Self {
        g.0
    }
}

impl<T: Clone> Grid<T> {
    pub fn values(&self) -> &[T] {
        &self.0
    }
}

fn default_target_error() -> f64 {
    1e-6
}
fn default_sample_dt() -> f64 {
    1.0
}
fn default_level() -> f64 {
    0.95
}
fn default_speed_bound() -> f64 {
    3.0
}
fn default_meeting_window_c() -> f64 {
    5.0
}
fn default_error_constant() -> f64 {
    1.0
}
fn default_meeting_ratio() -> f64 {
    0.25
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    /// `p(e_i)` for `i = 1..d`.
    pub p_pos: Vec<f64>,
    /// `p(-e_i)` for `i = 1..d`.
    pub p_neg: Vec<f64>,
    /// Particle density per site.
    #[serde(default)]
    pub rho: Grid<f64>,
    /// Time horizons (also the times of kernel, drift and deviation runs).
    #[serde(default)]
    pub horizon: Grid<f64>,
    /// Allowed probability that a walk from outside the window matters.
    #[serde(default = "default_target_error")]
    pub target_error: f64,
    pub replicas: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<String>,
    /// Worker threads; all cores when absent.
    #[serde(default)]
    pub workers: Option<usize>,
    /// Spacing of the front samples in time.
    #[serde(default = "default_sample_dt")]
    pub sample_dt: f64,
    /// Confidence level of intervals and one-sided tests.
    #[serde(default = "default_level")]
    pub level: f64,

    /// front-sweep: report `P[r_T >= threshold_speed * T]`.
    #[serde(default)]
    pub threshold_speed: Option<f64>,
    /// Sites per unit time the infection is assumed not to exceed when sizing windows.
    #[serde(default = "default_speed_bound")]
    pub speed_bound: f64,

    /// gip-stats: rebuild, encode and replay a path to every infected site.
    #[serde(default)]
    pub gip_check: bool,

    #[serde(default)]
    pub coupling: Option<CouplingKind>,
    /// couple (monotone), renorm (monotonicity): the sparser density.
    #[serde(default)]
    pub rho_low: Option<f64>,
    /// couple (sprinkled): target box `[a, b]^d`.
    #[serde(default)]
    pub target: Option<[i64; 2]>,
    #[serde(default = "default_meeting_window_c")]
    pub meeting_window_c: f64,

    /// decouple: box side `n` and time gaps between the boxes.
    #[serde(default)]
    pub side: Option<i64>,
    #[serde(default)]
    pub gap: Grid<f64>,
    /// decouple: catalog entries `one`, `at_most:<m>`, `empty_throughout`.
    #[serde(default)]
    pub probes: Vec<String>,
    #[serde(default = "default_error_constant")]
    pub error_constant: f64,

    #[serde(default)]
    pub renorm_kind: Option<RenormKind>,
    /// renorm: base scales `L_0`.
    #[serde(default)]
    pub l0: Grid<u64>,
    /// renorm: scale index of the box events.
    #[serde(default)]
    pub k: usize,
    /// renorm (ladder): number of scales above `L_0`.
    #[serde(default)]
    pub k_max: Option<usize>,
    /// renorm (trigger): scales `L`.
    #[serde(default)]
    pub scales: Grid<u64>,

    #[serde(default)]
    pub stats_kind: Option<StatsKind>,
    /// stats (poisson-tail): thresholds `A`.
    #[serde(default)]
    pub thresholds: Vec<u64>,
    /// stats (invariant): interior window `[a, b]^d`.
    #[serde(default)]
    pub interior: Option<[i64; 2]>,
    /// stats (kernel-mc, meeting): lattice points; meetings start at `x` and the origin.
    #[serde(default)]
    pub points: Vec<Vec<i64>>,
    /// stats (deviation, mushroom): deviation slopes.
    #[serde(default)]
    pub eps: Grid<f64>,
    /// stats (floors): half-width of the scanned window in units of `sqrt(t)`.
    #[serde(default)]
    pub window_c: Option<f64>,
    #[serde(default = "default_meeting_ratio")]
    pub meeting_ratio: f64,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs serialize")
    }

    pub fn load(path: &Path) -> Result<Self> {
        RunConfig::from_toml(&std::fs::read_to_string(path)?)
    }

    /// A minimal config for `experiment` with the given law.
    pub fn new(experiment: Experiment, p_pos: Vec<f64>, p_neg: Vec<f64>, replicas: u64) -> Self {
        RunConfig {
            experiment,
            p_pos,
            p_neg,
            rho: Grid::default(),
            horizon: Grid::default(),
            target_error: default_target_error(),
            replicas,
            seed: 0,
            out_dir: None,
            workers: None,
            sample_dt: default_sample_dt(),
            level: default_level(),
            threshold_speed: None,
            speed_bound: default_speed_bound(),
            gip_check: false,
            coupling: None,
            rho_low: None,
            target: None,
            meeting_window_c: default_meeting_window_c(),
            side: None,
            gap: Grid::default(),
            probes: Vec::new(),
            error_constant: default_error_constant(),
            renorm_kind: None,
            l0: Grid::default(),
            k: 0,
            k_max: None,
            scales: Grid::default(),
            stats_kind: None,
            thresholds: Vec::new(),
            interior: None,
            points: Vec::new(),
            eps: Grid::default(),
            window_c: None,
            meeting_ratio: default_meeting_ratio(),
        }
    }

    pub fn law(&self) -> Result<JumpDistribution> {
        Ok(JumpDistribution::new(self.p_pos.clone(), self.p_neg.clone())?)
    }

    pub fn dim(&self) -> usize {
        self.p_pos.len()
    }

    pub fn probes(&self) -> Result<Vec<Probe>> {
        self.probes.iter().map(|s| parse_probe(s)).collect()
    }

    /// Checks shared by every experiment; the experiment-specific ones run in
    /// the planning step of each command.
    pub fn check_common(&self) -> Result<JumpDistribution> {
        let law = self.law()?;
        if self.replicas == 0 {
            return Err(missing("replicas", "must be at least 1"));
        }
        if !(self.target_error > 0.0 && self.target_error < 1.0) {
            return Err(missing("target_error", "must lie in (0, 1)"));
        }
        if !(self.level > 0.5 && self.level < 1.0) {
            return Err(missing("level", "must lie in (0.5, 1)"));
        }
        if !(self.sample_dt > 0.0 && self.sample_dt.is_finite()) {
            return Err(missing("sample_dt", "must be positive"));
        }
        if self.workers == Some(0) {
            return Err(missing("workers", "must be at least 1"));
        }
        if let Some(x) = self.rho.values().iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(missing("rho", &format!("{x} must be finite and nonnegative")));
        }
        if let Some(x) = self.horizon.values().iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return Err(missing("horizon", &format!("{x} must be finite and positive")));
        }
        Ok(law)
    }
}

pub(crate) fn missing(key: &str, reason: &str) -> Error {
    Error::Config(format!("`{key}` {reason}"))
}

pub fn parse_probe(s: &str) -> Result<Probe> {
    match s.split_once(':') {
        None if s == "one" => Ok(Probe::One),
        None if s == "empty_throughout" => Ok(Probe::EmptyThroughout),
        Some(("at_most", m)) => {
            m.parse().map(|m| Probe::AtMost { m }).map_err(|_| Error::Config(format!("bad probe bound in `{s}`")))
        }
        _ => Err(Error::Config(format!("unknown probe `{s}`; expected one, at_most:<m> or empty_throughout"))),
    }
}

pub fn probe_name(p: &Probe) -> String {
    match p {
        Probe::One => "one".into(),
        Probe::AtMost { m } => format!("at_most:{m}"),
        Probe::EmptyThroughout => "empty_throughout".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FRONT: &str = r#"
experiment = "front-sweep"
p_pos = [0.25]
p_neg = [0.75]
rho = [0.02, 0.05]
horizon = 200.0
replicas = 200
seed = 7
threshold_speed = -0.25
"#;

    #[test]
    fn parses_and_round_trips() {
        let c = RunConfig::from_toml(FRONT).unwrap();
        assert_eq!(c.experiment, Experiment::FrontSweep);
        assert_eq!(c.rho.values(), &[0.02, 0.05]);
        assert_eq!(c.horizon.values(), &[200.0]);
        assert_eq!(c.target_error, 1e-6);
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
        c.check_common().unwrap();
    }

    #[test]
    fn unknown_keys_are_errors() {
        let e = RunConfig::from_toml(&format!("{FRONT}\nrho_hgih = 3\n")).unwrap_err();
        assert!(e.to_string().contains("rho_hgih"), "{e}");
    }

    #[test]
    fn invalid_law_is_rejected() {
        let mut c = RunConfig::from_toml(FRONT).unwrap();
        c.p_neg = vec![0.5];
        assert!(c.check_common().is_err());
        c.p_neg = vec![0.75];
        c.replicas = 0;
        assert!(c.check_common().is_err());
    }

    #[test]
    fn probe_catalog() {
        assert_eq!(parse_probe("at_most:3").unwrap(), Probe::AtMost { m: 3 });
        assert_eq!(parse_probe("empty_throughout").unwrap(), Probe::EmptyThroughout);
        assert!(parse_probe("at_most:x").is_err());
        assert!(parse_probe("sometimes").is_err());
        for p in [Probe::One, Probe::AtMost { m: 2 }, Probe::EmptyThroughout] {
            assert_eq!(parse_probe(&probe_name(&p)).unwrap(), p);
        }
    }
}
