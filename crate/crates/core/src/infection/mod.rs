//! Infection on top of the jump stream.
//!
//! A site is either wholly healthy or wholly infected. When an infected
//! particle lands on healthy ones they are all infected by it; when a healthy
//! particle lands on an infected site it is infected by the lowest-id infected
//! particle there.

pub mod gip;
pub mod run;

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::engine::{Configuration, JumpEvent, ParticleId};
use crate::error::{Error, Result};
use crate::lattice::Site;

pub use gip::{encode_gip, reconstruct_gip, replay_gip, GipEncoding, GipPath};
pub use run::{run_infection, run_recorded, FrontTrace, InfectionOutcome, InfectionSetup, RecordedRun};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfectionEvent {
    pub time: f64,
    pub site: Site,
    pub infector: ParticleId,
    pub newly_infected: Vec<ParticleId>,
}

/// Infected set, genealogy and running statistics for one system.
#[derive(Clone, Debug)]
pub struct InfectionState {
    time: f64,
    start: f64,
    infected: Vec<bool>,
    infected_total: usize,
    /// Infection time per slot (`inf` when healthy).
    infected_at: Vec<f64>,
    /// True when the particle was the mover of the jump that infected it.
    by_arrival: Vec<bool>,
    /// Infected particles present at the infection, the admissible predecessors.
    witnesses: Vec<Vec<u32>>,
    jumps: Vec<u32>,
    /// `best[q] - jumps_q(t_q)`: most jumps of a path handing over to `q`, less
    /// `q`'s own jump count at that moment.
    offset: Vec<i64>,
    front_counts: BTreeMap<i64, u32>,
    front_max: Option<i64>,
    range: i64,
    seed_site: Site,
    seed_cohort: Vec<u32>,
    genealogy: Vec<InfectionEvent>,
}

impl InfectionState {
    /// Infect every particle at the origin, including the extra one.
    pub fn seed(cfg: &Configuration) -> Self {
        Self::seed_at(cfg, Site::origin(cfg.window().dim()))
    }

    /// Infect every particle currently at `site`; used for restarts from a box anchor.
    pub fn seed_at(cfg: &Configuration, site: Site) -> Self {
        let n = cfg.len();
        let mut s = InfectionState {
            time: cfg.time(),
            start: cfg.time(),
            infected: vec![false; n],
            infected_total: 0,
            infected_at: vec![f64::INFINITY; n],
            by_arrival: vec![false; n],
            witnesses: vec![Vec::new(); n],
            jumps: vec![0; n],
            offset: vec![0; n],
            front_counts: BTreeMap::new(),
            front_max: None,
            range: 0,
            seed_site: site,
            seed_cohort: Vec::new(),
            genealogy: Vec::new(),
        };
        let mut cohort: Vec<u32> = cfg.slots_at(&site).to_vec();
        cohort.sort_unstable();
        if let Some(&first) = cohort.iter().find(|&&q| cfg.id(q as usize).extra).or(cohort.first()) {
            for &q in &cohort {
                s.mark(q as usize, site, cfg.time(), false);
            }
            s.genealogy.push(InfectionEvent {
                time: cfg.time(),
                site,
                infector: cfg.id(first as usize),
                newly_infected: cohort.iter().map(|&q| cfg.id(q as usize)).collect(),
            });
        }
        s.seed_cohort = cohort;
        s
    }

    fn mark(&mut self, slot: usize, at: Site, time: f64, arrived: bool) {
        self.infected[slot] = true;
        self.infected_total += 1;
        self.infected_at[slot] = time;
        self.by_arrival[slot] = arrived;
        *self.front_counts.entry(at.first()).or_insert(0) += 1;
        self.range = self.range.max(at.linf_norm());
        self.bump_front();
    }

    fn bump_front(&mut self) {
        if let Some((&x, _)) = self.front_counts.last_key_value() {
            self.front_max = Some(self.front_max.map_or(x, |m| m.max(x)));
        }
    }

    /// Update after `ev` has been applied to `cfg`.
    pub fn propagate(&mut self, ev: &JumpEvent, cfg: &Configuration) -> Result<()> {
        let p = ev.slot as usize;
        if p >= self.infected.len() || cfg.id(p) != ev.particle {
            return Err(Error::UnknownParticle(ev.particle.to_string()));
        }
        self.time = ev.time;
        self.jumps[p] += 1;
        let here = cfg.slots_at(&ev.to);
        if self.infected[p] {
            let c = self.front_counts.get_mut(&ev.from.first()).expect("infected particle tracked");
            *c -= 1;
            if *c == 0 {
                self.front_counts.remove(&ev.from.first());
            }
            *self.front_counts.entry(ev.to.first()).or_insert(0) += 1;
            self.range = self.range.max(ev.to.linf_norm());
            self.bump_front();
            let mut victims: Vec<u32> = here.iter().copied().filter(|&q| !self.infected[q as usize]).collect();
            if victims.is_empty() {
                return Ok(());
            }
            victims.sort_unstable();
            let via = self.offset[p] + self.jumps[p] as i64;
            for &q in &victims {
                let q = q as usize;
                self.mark(q, ev.to, ev.time, false);
                self.witnesses[q] = vec![p as u32];
                self.offset[q] = via - self.jumps[q] as i64;
            }
            self.genealogy.push(InfectionEvent {
                time: ev.time,
                site: ev.to,
                infector: ev.particle,
                newly_infected: victims.iter().map(|&q| cfg.id(q as usize)).collect(),
            });
        } else {
            let mut sick: Vec<u32> = here.iter().copied().filter(|&q| self.infected[q as usize]).collect();
            if sick.is_empty() {
                return Ok(());
            }
            sick.sort_unstable();
            let best = sick.iter().map(|&q| self.offset[q as usize] + self.jumps[q as usize] as i64).max().unwrap();
            self.mark(p, ev.to, ev.time, true);
            self.offset[p] = best - self.jumps[p] as i64;
            self.genealogy.push(InfectionEvent {
                time: ev.time,
                site: ev.to,
                infector: cfg.id(sick[0] as usize),
                newly_infected: vec![ev.particle],
            });
            self.witnesses[p] = sick;
        }
        Ok(())
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub(crate) fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    pub fn start_time(&self) -> f64 {
        self.start
    }

    pub fn is_infected(&self, slot: usize) -> bool {
        self.infected[slot]
    }

    pub fn infected_count(&self) -> usize {
        self.infected_total
    }

    pub fn infection_time(&self, slot: usize) -> Option<f64> {
        self.infected[slot].then_some(self.infected_at[slot])
    }

    pub(crate) fn infected_by_arrival(&self, slot: usize) -> bool {
        self.by_arrival[slot]
    }

    pub(crate) fn witnesses(&self, slot: usize) -> &[u32] {
        &self.witnesses[slot]
    }

    pub fn seed_site(&self) -> Site {
        self.seed_site
    }

    pub fn seed_cohort(&self) -> &[u32] {
        &self.seed_cohort
    }

    pub fn genealogy(&self) -> &[InfectionEvent] {
        &self.genealogy
    }

    /// Infected particle ids.
    pub fn infected_ids(&self, cfg: &Configuration) -> Vec<ParticleId> {
        (0..self.infected.len()).filter(|&s| self.infected[s]).map(|s| cfg.id(s)).collect()
    }

    /// Infected counts per site.
    pub fn infected_sites(&self, cfg: &Configuration) -> BTreeMap<Site, usize> {
        let mut m = BTreeMap::new();
        for s in (0..self.infected.len()).filter(|&s| self.infected[s]) {
            *m.entry(cfg.position(s)).or_insert(0) += 1;
        }
        m
    }

    /// `r_t`: largest first coordinate of an infected particle.
    pub fn front(&self) -> Option<i64> {
        self.front_counts.last_key_value().map(|(&x, _)| x)
    }

    /// `max_{s <= t} r_s`.
    pub fn front_running_max(&self) -> Option<i64> {
        self.front_max
    }

    /// Largest `l_inf` norm of any site an infected particle has occupied.
    pub fn infected_range(&self) -> i64 {
        self.range
    }

    /// Largest number of jumps along any genealogical path ending now.
    pub fn max_gip_jumps(&self) -> Option<i64> {
        (0..self.infected.len())
            .filter(|&s| self.infected[s])
            .map(|s| self.offset[s] + self.jumps[s] as i64)
            .max()
    }

    /// Every site has either no infected particle or only infected ones.
    pub fn is_pure(&self, cfg: &Configuration) -> bool {
        cfg.occupied().all(|(site, _)| {
            let slots = cfg.slots_at(&site);
            let k = slots.iter().filter(|&&q| self.infected[q as usize]).count();
            k == 0 || k == slots.len()
        })
    }

    /// Every infected particle outside the seed cohort has a witness infected earlier.
    pub fn genealogy_complete(&self) -> bool {
        (0..self.infected.len()).filter(|&s| self.infected[s]).all(|s| {
            self.seed_cohort.contains(&(s as u32))
                || (!self.witnesses[s].is_empty()
                    && self.witnesses[s].iter().all(|&q| self.infected[q as usize] && self.infected_at[q as usize] <= self.infected_at[s]))
        })
    }

    /// Genealogy dump: `time,site...,infector_id,new_count`.
    pub fn write_genealogy_csv<W: Write>(&self, dim: usize, mut w: W) -> io::Result<()> {
        let site_cols: Vec<String> =
            if dim == 1 { vec!["site".into()] } else { (1..=dim).map(|i| format!("site_{i}")).collect() };
        writeln!(w, "time,{},infector_id,new_count", site_cols.join(","))?;
        for e in &self.genealogy {
            let coords: Vec<String> = e.site.coords().iter().map(|c| c.to_string()).collect();
            writeln!(w, "{:.9},{},{},{}", e.time, coords.join(","), e.infector, e.newly_infected.len())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{Engine, RandomSource};
    use crate::lattice::{JumpDistribution, SiteBox};
    use proptest::prelude::*;

    fn s(x: i64) -> Site {
        Site::new(&[x])
    }

    #[test]
    fn seeding() {
        let w = SiteBox::centered(1, 5);
        let c = Configuration::from_counts(w, &[], Some(s(0))).unwrap();
        let st = InfectionState::seed(&c);
        assert_eq!(st.infected_count(), 1);
        assert_eq!(st.front(), Some(0));

        let c = Configuration::from_counts(w, &[(s(0), 3), (s(2), 1)], Some(s(0))).unwrap();
        let st = InfectionState::seed(&c);
        assert_eq!(st.infected_count(), 4);
        assert_eq!(st.infected_sites(&c).len(), 1);
        assert!(st.genealogy()[0].infector.extra);
    }

    fn ev(cfg: &mut Configuration, t: f64, id: ParticleId, to: i64) -> JumpEvent {
        let slot = cfg.slot_of(&id).unwrap();
        let e = JumpEvent { time: t, particle: id, slot: slot as u32, from: cfg.position(slot), to: s(to) };
        cfg.apply(&e).unwrap();
        e
    }

    // Hand-simulated fixture: seed at 0, healthy a at 2 and b at -1.
    #[test]
    fn scripted_three_particle_fixture() {
        let w = SiteBox::centered(1, 10);
        let a = ParticleId::new(s(2), 1);
        let b = ParticleId::new(s(-1), 1);
        let seed = ParticleId::extra_at(s(0));
        let mut cfg = Configuration::from_counts(w, &[(s(2), 1), (s(-1), 1)], Some(s(0))).unwrap();
        let mut st = InfectionState::seed(&cfg);
        // seed steps right onto empty site 1: nothing happens
        let e = ev(&mut cfg, 0.5, seed, 1);
        st.propagate(&e, &cfg).unwrap();
        assert_eq!(st.infected_count(), 1);
        assert_eq!(st.front(), Some(1));
        // healthy a steps onto the seed: a infected, infector is the seed
        let e = ev(&mut cfg, 1.0, a, 1);
        st.propagate(&e, &cfg).unwrap();
        assert_eq!(st.infected_count(), 2);
        assert_eq!(st.genealogy().last().unwrap().infector, seed);
        // b steps to -2, away from everything
        let e = ev(&mut cfg, 1.5, b, -2);
        st.propagate(&e, &cfg).unwrap();
        // a walks left to 0 then -1, b comes back to -1... a lands on b at -1
        let e = ev(&mut cfg, 2.0, a, 0);
        st.propagate(&e, &cfg).unwrap();
        let e = ev(&mut cfg, 2.5, b, -1);
        st.propagate(&e, &cfg).unwrap();
        assert_eq!(st.infected_count(), 2);
        let e = ev(&mut cfg, 3.0, a, -1);
        st.propagate(&e, &cfg).unwrap();
        assert_eq!(st.infected_count(), 3);
        assert_eq!(st.genealogy().last().unwrap().infector, a);
        assert_eq!(st.front(), Some(1));
        assert_eq!(st.front_running_max(), Some(1));
        assert_eq!(st.infected_range(), 1);
        // path seed(1 jump) -> a(2 jumps after infection) -> b(0 jumps) = 3
        assert_eq!(st.max_gip_jumps(), Some(3));
        assert!(st.is_pure(&cfg));
        assert!(st.genealogy_complete());
    }

    #[test]
    fn front_fixture() {
        let w = SiteBox::centered(1, 10);
        let mut cfg = Configuration::from_counts(w, &[(s(-3), 1), (s(5), 1), (s(0), 1)], None).unwrap();
        let mut st = InfectionState::seed_at(&cfg, s(0));
        assert_eq!(st.front(), Some(0));
        // restart from site 0 infects only its own particle
        for (t, to) in [(1.0, -1), (2.0, -2), (3.0, -3)] {
            let e = ev(&mut cfg, t, ParticleId::new(s(0), 1), to);
            st.propagate(&e, &cfg).unwrap();
        }
        assert_eq!(st.infected_count(), 2);
        assert_eq!(st.front(), Some(-3));
        assert_eq!(st.front_running_max(), Some(0));
    }

    #[test]
    fn unknown_particle_is_an_error() {
        let w = SiteBox::centered(1, 5);
        let cfg = Configuration::from_counts(w, &[(s(1), 1)], Some(s(0))).unwrap();
        let mut st = InfectionState::seed(&cfg);
        let bogus = JumpEvent { time: 1.0, particle: ParticleId::new(s(4), 7), slot: 0, from: s(1), to: s(2) };
        assert!(matches!(st.propagate(&bogus, &cfg), Err(Error::UnknownParticle(_))));
    }

    fn brute_front(st: &InfectionState, cfg: &Configuration) -> Option<i64> {
        (0..cfg.len()).filter(|&q| st.is_infected(q)).map(|q| cfg.position(q).first()).max()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn front_purity_and_range_on_random_runs(seed in 0u64..10_000, rho in 0.2f64..3.0, right in 0.15f64..0.85) {
            let law = JumpDistribution::one_dim(right).unwrap();
            let w = SiteBox::centered(1, 40);
            let src = RandomSource::new(seed);
            let cfg = Configuration::poisson(rho, &SiteBox::centered(1, 15), w, &src).unwrap();
            let cfg = cfg.with_particle(ParticleId::extra_at(s(0)), s(0)).unwrap();
            let mut st = InfectionState::seed(&cfg);
            let mut e = Engine::new(&law, cfg, &src).unwrap();
            let mut ok = true;
            for k in 1..=10 {
                e.evolve(k as f64, |ev, c| {
                    st.propagate(ev, c).unwrap();
                });
                ok &= st.front() == brute_front(&st, e.config());
                ok &= st.is_pure(e.config());
                ok &= st.infected_range() >= st.front().unwrap().abs();
            }
            prop_assert!(ok);
            prop_assert!(st.genealogy_complete());
        }
    }
}
