//! Genealogical infected paths: reconstruction from the genealogy, the
//! `(k, n, (k_i), (j_i))` encoding, and structural replay of an encoding
//! against the event log.
//!
//! Indexing: a path follows `n` particles `X_1..X_n`; `X_{i+1}` is infected
//! at `t_i` while sharing a site with `X_i`. There are `n - 1` transitions.
//! `j_i > 0` names `X_{i+1}` as the `j_i`-th healthy particle (by id) on the
//! site where `X_i` landed with its last jump; `j_i < 0` names it as the
//! `|j_i|`-th healthy particle to arrive on `X_i`'s site after `X_i` settled.
//! `seed_rank` picks `X_1` within the seed cohort.

use serde::{Deserialize, Serialize};

use super::InfectionState;
use crate::engine::{Configuration, EventLog, JumpEvent, ParticleId};
use crate::error::{Error, Result};
use crate::lattice::Site;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GipPath {
    pub target: Site,
    pub horizon: f64,
    /// `t_0 < t_1 < ... < t_{n-1}`; `t_0` is the seeding time.
    pub times: Vec<f64>,
    /// `X_1 .. X_n`.
    pub particles: Vec<ParticleId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GipEncoding {
    pub k: u64,
    pub n: usize,
    pub jumps_per_particle: Vec<u32>,
    pub transitions: Vec<i64>,
    pub seed_rank: u32,
}

impl GipEncoding {
    pub fn check(&self) -> Result<()> {
        if self.n == 0 || self.jumps_per_particle.len() != self.n || self.transitions.len() + 1 != self.n {
            return Err(Error::Encoding(format!("shape mismatch in {self:?}")));
        }
        if self.jumps_per_particle.iter().map(|&k| k as u64).sum::<u64>() != self.k {
            return Err(Error::Encoding(format!("jump counts do not sum to k in {self:?}")));
        }
        for (i, &j) in self.transitions.iter().enumerate() {
            if j == 0 || (self.jumps_per_particle[i] == 0 && j > 0) {
                return Err(Error::Encoding(format!("transition {} = {j} with k = {}", i + 1, self.jumps_per_particle[i])));
            }
        }
        if self.seed_rank == 0 {
            return Err(Error::Encoding("seed rank is 1-based".into()));
        }
        Ok(())
    }
}

/// One canonical path to `(target, T)`: start from the lowest-id infected
/// particle at `target` and step back through the earliest-infected witness.
/// `last` is the configuration at `T`.
pub fn reconstruct_gip(state: &InfectionState, last: &Configuration, target: Site) -> Result<GipPath> {
    let mut here: Vec<u32> = last.slots_at(&target).iter().copied().filter(|&q| state.is_infected(q as usize)).collect();
    here.sort_unstable();
    let Some(&end) = here.first() else {
        return Err(Error::NoPath(format!("no infected particle at {target:?} at time {}", last.time())));
    };
    let mut chain = vec![end as usize];
    let mut p = end as usize;
    while !state.seed_cohort().contains(&(p as u32)) {
        let w = state.witnesses(p);
        let q = w
            .iter()
            .map(|&q| q as usize)
            .min_by(|&a, &b| state.infected_at[a].total_cmp(&state.infected_at[b]).then(a.cmp(&b)))
            .ok_or_else(|| Error::NoPath(format!("{} has no recorded infector", last.id(p))))?;
        chain.push(q);
        p = q;
    }
    chain.reverse();
    let mut times = vec![state.start_time()];
    times.extend(chain[1..].iter().map(|&q| state.infected_at[q]));
    Ok(GipPath { target, horizon: last.time(), times, particles: chain.iter().map(|&q| last.id(q)).collect() })
}

fn events_between(log: &EventLog, lo: f64, hi: f64) -> &[JumpEvent] {
    let a = log.events.partition_point(|e| e.time <= lo);
    let b = log.events.partition_point(|e| e.time <= hi);
    &log.events[a..b]
}

impl GipPath {
    fn segment_end(&self, i: usize) -> f64 {
        self.times.get(i + 1).copied().unwrap_or(self.horizon)
    }

    /// Check the structural invariants.
    pub fn check(&self) -> Result<()> {
        if self.particles.is_empty() || self.times.len() != self.particles.len() {
            return Err(Error::Encoding("times and particles disagree".into()));
        }
        if self.times.windows(2).any(|w| !(w[0] < w[1])) || *self.times.last().unwrap() > self.horizon {
            return Err(Error::Encoding(format!("handoff times not increasing: {:?}", self.times)));
        }
        Ok(())
    }

    /// `gamma` as `(time, site)` checkpoints: the start and every followed jump.
    pub fn trajectory(&self, initial: &Configuration, log: &EventLog) -> Result<Vec<(f64, Site)>> {
        self.check()?;
        let first = initial.slot_of(&self.particles[0]).ok_or_else(|| Error::UnknownParticle(self.particles[0].to_string()))?;
        let mut out = vec![(self.times[0], initial.position(first))];
        for (i, id) in self.particles.iter().enumerate() {
            for e in events_between(log, self.times[i], self.segment_end(i)) {
                if e.particle == *id {
                    out.push((e.time, e.to));
                }
            }
        }
        Ok(out)
    }
}

/// Encode a reconstructed path. `initial` and `log` describe the run that
/// produced `state`.
pub fn encode_gip(path: &GipPath, state: &InfectionState, initial: &Configuration, log: &EventLog) -> Result<GipEncoding> {
    path.check()?;
    let slot = |id: &ParticleId| initial.slot_of(id).ok_or_else(|| Error::UnknownParticle(id.to_string()));
    let x1 = slot(&path.particles[0])?;
    let seed_rank = state
        .seed_cohort()
        .iter()
        .position(|&q| q as usize == x1)
        .ok_or_else(|| Error::Encoding(format!("{} is not in the seed cohort", path.particles[0])))? as u32
        + 1;
    let n = path.particles.len();
    let mut jumps_per_particle = Vec::with_capacity(n);
    let mut transitions = Vec::with_capacity(n.saturating_sub(1));
    for i in 0..n {
        let id = path.particles[i];
        let (lo, hi) = (path.times[i], path.segment_end(i));
        let own: Vec<&JumpEvent> = events_between(log, lo, hi).iter().filter(|e| e.particle == id).collect();
        jumps_per_particle.push(own.len() as u32);
        if i + 1 == n {
            break;
        }
        let next = path.particles[i + 1];
        let next_slot = slot(&next)?;
        if state.infected_by_arrival(next_slot) {
            let settled = own.last().map_or(lo, |e| e.time);
            let site = own.last().map_or_else(|| position_at(initial, log, id, lo), |e| Ok(e.to))?;
            let mut count = 0i64;
            let mut found = false;
            for e in events_between(log, settled, hi) {
                if e.to != site {
                    continue;
                }
                let mover = slot(&e.particle)?;
                if state.infection_time(mover).is_none_or(|t| t >= e.time) {
                    count += 1;
                    if e.particle == next {
                        found = true;
                        break;
                    }
                }
            }
            if !found {
                return Err(Error::Encoding(format!("{next} did not arrive on the site of {id}")));
            }
            transitions.push(-count);
        } else {
            let last = own.last().ok_or_else(|| Error::Encoding(format!("{id} never jumped onto {next}")))?;
            if last.time != hi {
                return Err(Error::Encoding(format!("{next} was not infected by the last jump of {id}")));
            }
            let g = state
                .genealogy()
                .iter()
                .find(|g| g.time == hi && g.newly_infected.contains(&next))
                .ok_or_else(|| Error::Encoding(format!("no infection event for {next}")))?;
            let rank = g.newly_infected.iter().position(|q| *q == next).unwrap() as i64 + 1;
            transitions.push(rank);
        }
    }
    let k = jumps_per_particle.iter().map(|&k| k as u64).sum();
    let enc = GipEncoding { k, n, jumps_per_particle, transitions, seed_rank };
    enc.check()?;
    Ok(enc)
}

fn position_at(initial: &Configuration, log: &EventLog, id: ParticleId, t: f64) -> Result<Site> {
    let slot = initial.slot_of(&id).ok_or_else(|| Error::UnknownParticle(id.to_string()))?;
    let mut pos = initial.position(slot);
    for e in events_between(log, f64::NEG_INFINITY, t) {
        if e.particle == id {
            pos = e.to;
        }
    }
    Ok(pos)
}

/// Result of replaying an encoding.
#[derive(Clone, Debug, PartialEq)]
pub struct GipReplay {
    pub endpoint: Site,
    pub jumps: u64,
    pub particles: Vec<ParticleId>,
    pub trajectory: Vec<(f64, Site)>,
}

/// Rebuild the path named by `enc` using only the initial configuration, the
/// event log and the infection rules.
pub fn replay_gip(enc: &GipEncoding, initial: &Configuration, log: &EventLog, horizon: f64) -> Result<GipReplay> {
    enc.check()?;
    let mut cfg = initial.clone();
    let mut st = InfectionState::seed(&cfg);
    let mut cur = *st
        .seed_cohort()
        .get(enc.seed_rank as usize - 1)
        .ok_or_else(|| Error::Encoding(format!("seed rank {} exceeds cohort", enc.seed_rank)))? as usize;
    let mut seg = 0usize;
    let mut remaining = enc.jumps_per_particle[0];
    let mut arrivals = 0i64;
    let mut particles = vec![cfg.id(cur)];
    let mut trajectory = vec![(cfg.time(), cfg.position(cur))];
    for ev in log.events.iter().take_while(|e| e.time <= horizon) {
        let mover = cfg.slot_of(&ev.particle).ok_or_else(|| Error::UnknownParticle(ev.particle.to_string()))?;
        cfg.apply(ev)?;
        let healthy_here: Vec<u32> = {
            let mut v: Vec<u32> =
                cfg.slots_at(&ev.to).iter().copied().filter(|&q| q as usize != mover && !st.is_infected(q as usize)).collect();
            v.sort_unstable();
            v
        };
        let mover_healthy = !st.is_infected(mover);
        st.propagate(ev, &cfg)?;
        let last_seg = seg + 1 == enc.n;
        if mover == cur {
            if remaining == 0 {
                return Err(Error::Encoding(format!("{} jumps more often than encoded", cfg.id(cur))));
            }
            remaining -= 1;
            trajectory.push((ev.time, ev.to));
            if remaining == 0 && !last_seg && enc.transitions[seg] > 0 {
                let j = enc.transitions[seg] as usize;
                let &next = healthy_here
                    .get(j - 1)
                    .ok_or_else(|| Error::Encoding(format!("only {} healthy particles to pick from", healthy_here.len())))?;
                cur = next as usize;
                seg += 1;
                remaining = enc.jumps_per_particle[seg];
                arrivals = 0;
                particles.push(cfg.id(cur));
            }
            continue;
        }
        if remaining == 0 && !last_seg && enc.transitions[seg] < 0 && mover_healthy && ev.to == cfg.position(cur) {
            arrivals += 1;
            if arrivals == -enc.transitions[seg] {
                cur = mover;
                seg += 1;
                remaining = enc.jumps_per_particle[seg];
                arrivals = 0;
                particles.push(cfg.id(cur));
            }
        }
    }
    if seg + 1 != enc.n || remaining != 0 {
        return Err(Error::Encoding(format!("replay stopped in segment {} with {remaining} jumps left", seg + 1)));
    }
    Ok(GipReplay { endpoint: cfg.position(cur), jumps: enc.k, particles, trajectory })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::RandomSource;
    use crate::infection::{run_recorded, InfectionSetup};
    use crate::lattice::{JumpDistribution, SiteBox};

    fn s(x: i64) -> Site {
        Site::new(&[x])
    }

    struct Script {
        cfg: Configuration,
        initial: Configuration,
        st: InfectionState,
        log: EventLog,
    }

    impl Script {
        fn new(counts: &[(Site, u32)]) -> Self {
            let cfg = Configuration::from_counts(SiteBox::centered(1, 20), counts, Some(s(0))).unwrap();
            let st = InfectionState::seed(&cfg);
            Script { initial: cfg.clone(), cfg, st, log: EventLog::new() }
        }

        fn jump(&mut self, t: f64, id: ParticleId, to: i64) {
            let slot = self.cfg.slot_of(&id).unwrap();
            let e = JumpEvent { time: t, particle: id, slot: slot as u32, from: self.cfg.position(slot), to: s(to) };
            self.cfg.apply(&e).unwrap();
            self.st.propagate(&e, &self.cfg).unwrap();
            self.log.push(&e);
        }

        fn finish(&mut self, t: f64) {
            self.cfg.set_time(t);
        }
    }

    #[test]
    fn seed_alone() {
        let mut sc = Script::new(&[]);
        let seed = ParticleId::extra_at(s(0));
        for (i, x) in [1, 2, 1, 0, -1].into_iter().enumerate() {
            sc.jump(i as f64 + 0.5, seed, x);
        }
        sc.finish(10.0);
        let path = reconstruct_gip(&sc.st, &sc.cfg, s(-1)).unwrap();
        assert_eq!(path.particles, vec![seed]);
        let enc = encode_gip(&path, &sc.st, &sc.initial, &sc.log).unwrap();
        assert_eq!(enc, GipEncoding { k: 5, n: 1, jumps_per_particle: vec![5], transitions: vec![], seed_rank: 1 });
        assert!(reconstruct_gip(&sc.st, &sc.cfg, s(3)).is_err());
    }

    #[test]
    fn trivial_path_before_any_event() {
        let mut sc = Script::new(&[(s(0), 2)]);
        sc.finish(0.0);
        let path = reconstruct_gip(&sc.st, &sc.cfg, s(0)).unwrap();
        assert_eq!(path.particles.len(), 1);
        let enc = encode_gip(&path, &sc.st, &sc.initial, &sc.log).unwrap();
        assert_eq!(enc.transitions.len(), 0);
        assert_eq!(enc.k, 0);
    }

    // Two handoffs: the seed lands on a (j = +1), then b is the second
    // healthy arrival on a's site (j = -2).
    #[test]
    fn two_handoff_fixture() {
        let a = ParticleId::new(s(2), 1);
        let b = ParticleId::new(s(8), 1);
        let c = ParticleId::new(s(5), 1);
        let seed = ParticleId::extra_at(s(0));
        let mut sc = Script::new(&[(s(2), 1), (s(8), 1), (s(5), 1)]);
        sc.jump(0.4, seed, 1);
        sc.jump(0.9, seed, 2); // infects a at 2
        sc.jump(1.3, a, 3);
        sc.jump(1.6, c, 4);
        sc.jump(2.0, c, 3); // first healthy arrival on a's site
        sc.jump(2.2, b, 7);
        sc.jump(2.4, b, 6);
        sc.jump(2.6, b, 5);
        sc.jump(2.8, b, 4);
        sc.jump(3.0, b, 3); // second healthy arrival
        sc.jump(3.5, b, 4);
        sc.jump(4.0, b, 5);
        sc.finish(5.0);
        let path = reconstruct_gip(&sc.st, &sc.cfg, s(5)).unwrap();
        // b's witnesses are a and c; a was infected earlier
        assert_eq!(path.particles, vec![seed, a, b]);
        assert_eq!(path.times, vec![0.0, 0.9, 3.0]);
        let enc = encode_gip(&path, &sc.st, &sc.initial, &sc.log).unwrap();
        assert_eq!(enc.jumps_per_particle, vec![2, 1, 2]);
        assert_eq!(enc.transitions, vec![1, -2]);
        assert_eq!(enc.k, 5);
        let rep = replay_gip(&enc, &sc.initial, &sc.log, 5.0).unwrap();
        assert_eq!(rep.endpoint, s(5));
        assert_eq!(rep.particles, path.particles);
        assert_eq!(rep.trajectory, path.trajectory(&sc.initial, &sc.log).unwrap());
        assert_eq!(sc.st.max_gip_jumps(), Some(5));
    }

    #[test]
    fn zero_jump_segment_uses_arrivals() {
        let a = ParticleId::new(s(1), 1);
        let mut sc = Script::new(&[(s(1), 1)]);
        sc.jump(1.0, a, 0);
        sc.finish(2.0);
        let path = reconstruct_gip(&sc.st, &sc.cfg, s(0)).unwrap();
        let path = GipPath { particles: vec![path.particles[0], a], times: vec![0.0, 1.0], ..path };
        let enc = encode_gip(&path, &sc.st, &sc.initial, &sc.log).unwrap();
        assert_eq!(enc.jumps_per_particle, vec![0, 0]);
        assert_eq!(enc.transitions, vec![-1]);
        assert_eq!(replay_gip(&enc, &sc.initial, &sc.log, 2.0).unwrap().endpoint, s(0));
    }

    #[test]
    fn malformed_encodings_are_rejected() {
        let bad = GipEncoding { k: 3, n: 2, jumps_per_particle: vec![0, 3], transitions: vec![2], seed_rank: 1 };
        assert!(bad.check().is_err());
        let bad = GipEncoding { k: 4, n: 2, jumps_per_particle: vec![1, 2], transitions: vec![1], seed_rank: 1 };
        assert!(bad.check().is_err());
    }

    #[test]
    fn every_infected_site_has_a_replayable_path() {
        let law = JumpDistribution::one_dim(0.25).unwrap();
        let setup = InfectionSetup::new(law, 1.0, 20.0);
        for r in 0..20 {
            let run = run_recorded(&setup, &RandomSource::new(41).replica(r)).unwrap();
            let infected = run.state.infected_sites(&run.last);
            for (site, _) in run.last.occupied() {
                let res = reconstruct_gip(&run.state, &run.last, site);
                assert_eq!(res.is_ok(), infected.contains_key(&site));
                if let Ok(path) = res {
                    let enc = encode_gip(&path, &run.state, &run.initial, &run.log).unwrap();
                    let rep = replay_gip(&enc, &run.initial, &run.log, 20.0).unwrap();
                    assert_eq!(rep.endpoint, site);
                    assert_eq!(rep.particles, path.particles);
                }
            }
        }
    }
}
