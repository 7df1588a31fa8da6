use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::InfectionState;
use crate::engine::{truncation_radius, Configuration, Engine, EventLog, ParticleId, RandomSource};
use crate::error::{invalid, Result};
use crate::lattice::{JumpDistribution, Site, SiteBox};

/// Parameters of one infection run from the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfectionSetup {
    pub law: JumpDistribution,
    pub rho: f64,
    pub horizon: f64,
    pub sample_dt: f64,
    /// Half-width of the box the infection is expected to stay in; by default
    /// `speed_bound * horizon`.
    pub window_half_width: Option<i64>,
    pub speed_bound: f64,
    pub target_error: f64,
}

impl InfectionSetup {
    pub fn new(law: JumpDistribution, rho: f64, horizon: f64) -> Self {
        InfectionSetup { law, rho, horizon, sample_dt: 1.0, window_half_width: None, speed_bound: 3.0, target_error: 1e-6 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(invalid("rho", format!("{} must be finite and nonnegative", self.rho)));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(invalid("horizon", format!("{} must be finite and nonnegative", self.horizon)));
        }
        if !(self.sample_dt > 0.0) {
            return Err(invalid("sample_dt", format!("{} must be positive", self.sample_dt)));
        }
        if !(self.speed_bound > 0.0) {
            return Err(invalid("speed_bound", format!("{} must be positive", self.speed_bound)));
        }
        Ok(())
    }

    pub fn core_half_width(&self) -> i64 {
        self.window_half_width.unwrap_or((self.speed_bound * self.horizon).ceil() as i64 + 1)
    }

    pub fn window(&self) -> Result<SiteBox> {
        let n = self.core_half_width();
        let r = truncation_radius(self.rho, self.horizon, n, self.law.dim(), self.target_error)?;
        Ok(SiteBox::centered(self.law.dim(), r))
    }

    pub fn sample_times(&self) -> Vec<f64> {
        let mut ts = Vec::new();
        let mut k = 1u64;
        loop {
            let t = k as f64 * self.sample_dt;
            if t >= self.horizon - 1e-12 {
                break;
            }
            ts.push(t);
            k += 1;
        }
        ts.push(self.horizon);
        ts
    }
}

/// `(t, r_t)` at the sample times of one replica.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FrontTrace {
    pub samples: Vec<(f64, i64)>,
}

impl FrontTrace {
    pub fn write_csv<W: Write>(traces: &[FrontTrace], mut w: W) -> io::Result<()> {
        writeln!(w, "replica,t,r_t")?;
        for (i, tr) in traces.iter().enumerate() {
            for (t, r) in &tr.samples {
                writeln!(w, "{i},{},{r}", crate::harness::csv::fmt_g9(*t))?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfectionOutcome {
    pub trace: FrontTrace,
    pub front: i64,
    pub front_running_max: i64,
    pub max_gip_jumps: i64,
    pub infected_range: i64,
    pub infected: usize,
    pub particles: usize,
    pub window_radius: i64,
    pub window_exits: u64,
    /// The infection left the box the window was sized for.
    pub outside_core: bool,
}

fn initial(setup: &InfectionSetup, source: &RandomSource) -> Result<Configuration> {
    setup.validate()?;
    let window = setup.window()?;
    let cfg = Configuration::poisson(setup.rho, &window, window, source)?;
    let o = Site::origin(setup.law.dim());
    cfg.with_particle(ParticleId::extra_at(o), o)
}

fn outcome(setup: &InfectionSetup, st: &InfectionState, e: &Engine, trace: FrontTrace) -> InfectionOutcome {
    let front = st.front().expect("the seed never heals");
    InfectionOutcome {
        trace,
        front,
        front_running_max: st.front_running_max().unwrap_or(front),
        max_gip_jumps: st.max_gip_jumps().unwrap_or(0),
        infected_range: st.infected_range(),
        infected: st.infected_count(),
        particles: e.config().len(),
        window_radius: e.config().window().hi.first(),
        window_exits: e.exits(),
        outside_core: st.infected_range() > setup.core_half_width(),
    }
}

/// One replica: Poisson cloud plus the extra particle, infection from the origin.
pub fn run_infection(setup: &InfectionSetup, source: &RandomSource) -> Result<InfectionOutcome> {
    let cfg = initial(setup, source)?;
    let mut st = InfectionState::seed(&cfg);
    let mut e = Engine::new(&setup.law, cfg, &source.derive_label("walks"))?;
    let mut trace = FrontTrace::default();
    let mut err = None;
    for t in setup.sample_times() {
        e.evolve(t, |ev, c| {
            if let Err(x) = st.propagate(ev, c) {
                err.get_or_insert(x);
            }
        });
        st.set_time(t);
        trace.samples.push((t, st.front().expect("seed present")));
    }
    if let Some(x) = err {
        return Err(x);
    }
    Ok(outcome(setup, &st, &e, trace))
}

/// A run kept in full for genealogy checks.
pub struct RecordedRun {
    pub initial: Configuration,
    pub log: EventLog,
    pub state: InfectionState,
    pub last: Configuration,
    pub outcome: InfectionOutcome,
}

pub fn run_recorded(setup: &InfectionSetup, source: &RandomSource) -> Result<RecordedRun> {
    let initial = initial(setup, source)?;
    let mut st = InfectionState::seed(&initial);
    let mut e = Engine::new(&setup.law, initial.clone(), &source.derive_label("walks"))?;
    let mut log = EventLog::new();
    let mut trace = FrontTrace::default();
    let mut err = None;
    for t in setup.sample_times() {
        e.evolve(t, |ev, c| {
            log.push(ev);
            if let Err(x) = st.propagate(ev, c) {
                err.get_or_insert(x);
            }
        });
        st.set_time(t);
        trace.samples.push((t, st.front().expect("seed present")));
    }
    if let Some(x) = err {
        return Err(x);
    }
    let outcome = outcome(setup, &st, &e, trace);
    Ok(RecordedRun { initial, log, state: st, last: e.into_config(), outcome })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_density_front_is_seed_walk() {
        let law = JumpDistribution::one_dim(0.25).unwrap();
        let setup = InfectionSetup::new(law, 0.0, 100.0);
        let reps = 4000u64;
        let mut jumps = 0.0;
        let mut max_front = 0.0;
        for r in 0..reps {
            let o = run_infection(&setup, &RandomSource::new(3).replica(r)).unwrap();
            assert_eq!(o.infected, 1);
            jumps += o.max_gip_jumps as f64;
            max_front += o.front_running_max as f64;
        }
        let mean = jumps / reps as f64;
        assert!((mean - 100.0).abs() < 4.0 * (100.0 / reps as f64).sqrt(), "{mean}");
        // E[max_t X_t] for drift -1/2 converges to p/(q - p) = 1/2 for the embedded walk
        let m = max_front / reps as f64;
        assert!((m - 0.5).abs() < 0.1, "{m}");
    }

    #[test]
    fn sample_grid() {
        let law = JumpDistribution::one_dim(0.25).unwrap();
        let mut s = InfectionSetup::new(law, 1.0, 3.5);
        assert_eq!(s.sample_times(), vec![1.0, 2.0, 3.0, 3.5]);
        s.horizon = 0.0;
        assert_eq!(s.sample_times(), vec![0.0]);
    }
}
