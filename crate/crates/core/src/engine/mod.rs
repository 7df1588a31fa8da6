//! Graphical construction of independent continuous-time walkers.
//!
//! Every particle carries its own ChaCha8 stream keyed by its identity, so the
//! same walk `S^{x,n}` is reproduced whenever the particle exists, regardless
//! of which other particles share the window. Jumps are scheduled lazily in a
//! binary heap keyed by the next jump time.
//!
//! Holding times are Exponential(1). The model only fixes the rate up to a
//! global time change; rate 1 is assumed throughout.

pub mod eventlog;
pub mod invariant;
pub mod rng;
pub mod truncation;

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::{JumpDistribution, Site, SiteBox};

pub use eventlog::EventLog;
pub use invariant::{invariant_measure_check, InvariantReport};
pub use rng::RandomSource;
pub use truncation::{truncation_radius, truncation_slack};

/// Largest number of particles a single configuration may hold.
pub const MAX_PARTICLES: u64 = 20_000_000;
/// Largest number of sites in a dense window.
pub const MAX_WINDOW_SITES: u64 = 1 << 24;

/// Identity of the walk `S^{x,n}`: the `index`-th particle born at `origin`.
/// The additional infected particle at the origin has `index == 0` and `extra`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParticleId {
    pub origin: Site,
    pub index: u32,
    pub extra: bool,
}

impl ParticleId {
    pub fn new(origin: Site, index: u32) -> Self {
        ParticleId { origin, index, extra: false }
    }

    pub fn extra_at(origin: Site) -> Self {
        ParticleId { origin, index: 0, extra: true }
    }
}

impl fmt::Display for ParticleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}{}", self.origin, self.index, if self.extra { "*" } else { "" })
    }
}

impl fmt::Debug for ParticleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub particle: ParticleId,
    /// Slot of the particle in the configuration that produced the event.
    pub slot: u32,
    pub from: Site,
    pub to: Site,
}

/// Occupancy of a finite window. Slots are ordered by [`ParticleId`].
#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    window: SiteBox,
    time: f64,
    ids: Vec<ParticleId>,
    positions: Vec<Site>,
    cells: Vec<Vec<u32>>,
    frozen: Vec<bool>,
}

impl Configuration {
    pub fn empty(window: SiteBox) -> Result<Self> {
        Configuration::from_particles(window, Vec::new())
    }

    /// Build from explicit `(id, position)` pairs at time 0.
    pub fn from_particles(window: SiteBox, mut particles: Vec<(ParticleId, Site)>) -> Result<Self> {
        let volume = window.volume();
        if volume > MAX_WINDOW_SITES {
            return Err(Error::Capacity { what: "window sites", requested: volume, limit: MAX_WINDOW_SITES });
        }
        if particles.len() as u64 > MAX_PARTICLES {
            return Err(Error::Capacity {
                what: "particles",
                requested: particles.len() as u64,
                limit: MAX_PARTICLES,
            });
        }
        particles.sort_by(|a, b| a.0.cmp(&b.0));
        if let Some(w) = particles.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(invalid("particles", format!("duplicate id {}", w[0].0)));
        }
        let mut cells = vec![Vec::new(); volume as usize];
        let mut ids = Vec::with_capacity(particles.len());
        let mut positions = Vec::with_capacity(particles.len());
        for (slot, (id, pos)) in particles.into_iter().enumerate() {
            let Some(i) = window.index(&pos) else {
                return Err(invalid("particles", format!("{id} at {pos:?} outside window")));
            };
            cells[i].push(slot as u32);
            ids.push(id);
            positions.push(pos);
        }
        let frozen = vec![false; ids.len()];
        Ok(Configuration { window, time: 0.0, ids, positions, cells, frozen })
    }

    /// `counts[x]` particles at `x`, numbered `1..=counts[x]`, plus an optional extra particle.
    pub fn from_counts(window: SiteBox, counts: &[(Site, u32)], extra: Option<Site>) -> Result<Self> {
        let mut particles = Vec::new();
        for &(site, n) in counts {
            particles.extend((1..=n).map(|k| (ParticleId::new(site, k), site)));
        }
        if let Some(o) = extra {
            particles.push((ParticleId::extra_at(o), o));
        }
        Configuration::from_particles(window, particles)
    }

    /// I.i.d. Poisson(`rho`) counts on `region`, empty elsewhere in `window`.
    pub fn poisson(rho: f64, region: &SiteBox, window: SiteBox, source: &RandomSource) -> Result<Self> {
        if !(rho >= 0.0) || !rho.is_finite() {
            return Err(invalid("rho", format!("{rho} must be finite and nonnegative")));
        }
        if !(window.contains(&region.lo) && window.contains(&region.hi)) {
            return Err(invalid("region", "must lie inside the window"));
        }
        let expected = rho * region.volume() as f64;
        let ceiling = expected + 8.0 * expected.sqrt();
        if ceiling > MAX_PARTICLES as f64 {
            return Err(Error::Capacity { what: "particles", requested: ceiling as u64, limit: MAX_PARTICLES });
        }
        let mut counts = Vec::new();
        if rho > 0.0 {
            let dist = Poisson::new(rho).map_err(|e| invalid("rho", e.to_string()))?;
            let mut rng = source.derive_label("init").rng();
            for site in region.sites() {
                let n = dist.sample(&mut rng) as u32;
                if n > 0 {
                    counts.push((site, n));
                }
            }
        }
        Configuration::from_counts(window, &counts, None)
    }

    /// Like [`Configuration::poisson`], but the count at each site depends only
    /// on the site and `source`, so enlarging the window extends the same sample.
    pub fn poisson_keyed(rho: f64, region: &SiteBox, window: SiteBox, source: &RandomSource) -> Result<Self> {
        if !(rho >= 0.0) || !rho.is_finite() {
            return Err(invalid("rho", format!("{rho} must be finite and nonnegative")));
        }
        if !(window.contains(&region.lo) && window.contains(&region.hi)) {
            return Err(invalid("region", "must lie inside the window"));
        }
        let expected = rho * region.volume() as f64;
        if expected + 8.0 * expected.sqrt() > MAX_PARTICLES as f64 {
            return Err(Error::Capacity { what: "particles", requested: expected as u64, limit: MAX_PARTICLES });
        }
        let mut counts = Vec::new();
        if rho > 0.0 {
            let mut cdf = Vec::new();
            let mut p = (-rho).exp();
            let mut acc = 0.0;
            let mut k = 0u32;
            while acc < 1.0 - 1e-16 && k < 100_000 {
                acc += p;
                cdf.push(acc);
                k += 1;
                p *= rho / k as f64;
            }
            let base = source.derive_label("site");
            for site in region.sites() {
                let s = site.coords().iter().fold(base, |s, &c| s.derive(c as u64));
                let u = (s.fingerprint() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
                let n = cdf.partition_point(|&c| c <= u) as u32;
                if n > 0 {
                    counts.push((site, n));
                }
            }
        }
        Configuration::from_counts(window, &counts, None)
    }

    /// Keep each particle independently with probability `keep`, preserving
    /// identities: at each site the kept particles are those with the lowest indices.
    pub fn thinned(&self, keep: f64, source: &RandomSource) -> Result<Self> {
        if !(0.0..=1.0).contains(&keep) {
            return Err(invalid("keep", format!("{keep} outside [0, 1]")));
        }
        let mut rng = source.derive_label("thin").rng();
        let mut particles = Vec::new();
        for idx in 0..self.cells.len() {
            let mut here: Vec<ParticleId> = self.cells[idx].iter().map(|&s| self.ids[s as usize]).collect();
            if here.is_empty() {
                continue;
            }
            here.sort();
            let site = self.window.site_at(idx);
            let plain = here.iter().filter(|p| !p.extra).count();
            let kept = (0..plain).filter(|_| rng.random::<f64>() < keep).count() as u32;
            for p in here {
                if p.extra || p.index <= kept {
                    particles.push((p, site));
                }
            }
        }
        Configuration::from_particles(self.window, particles)
    }

    /// Add one particle; identities must stay unique.
    pub fn with_particle(&self, id: ParticleId, at: Site) -> Result<Self> {
        let mut list: Vec<(ParticleId, Site)> = self.ids.iter().copied().zip(self.positions.iter().copied()).collect();
        list.push((id, at));
        let mut c = Configuration::from_particles(self.window, list)?;
        c.time = self.time;
        Ok(c)
    }

    pub fn window(&self) -> &SiteBox {
        &self.window
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[ParticleId] {
        &self.ids
    }

    pub fn id(&self, slot: usize) -> ParticleId {
        self.ids[slot]
    }

    pub fn position(&self, slot: usize) -> Site {
        self.positions[slot]
    }

    pub fn positions(&self) -> &[Site] {
        &self.positions
    }

    pub fn slot_of(&self, id: &ParticleId) -> Option<usize> {
        self.ids.binary_search(id).ok()
    }

    /// Slots currently at `site` (empty outside the window).
    pub fn slots_at(&self, site: &Site) -> &[u32] {
        match self.window.index(site) {
            Some(i) => &self.cells[i],
            None => &[],
        }
    }

    pub fn count(&self, site: &Site) -> usize {
        self.slots_at(site).len()
    }

    pub fn is_frozen(&self, slot: usize) -> bool {
        self.frozen[slot]
    }

    pub fn frozen_count(&self) -> usize {
        self.frozen.iter().filter(|&&f| f).count()
    }

    /// Occupied sites with their counts, in lexicographic order.
    pub fn occupied(&self) -> impl Iterator<Item = (Site, usize)> + '_ {
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_empty())
            .map(|(i, c)| (self.window.site_at(i), c.len()))
    }

    /// Number of particles in `b`.
    pub fn count_in(&self, b: &SiteBox) -> usize {
        self.positions.iter().filter(|p| b.contains(p)).count()
    }

    fn move_slot(&mut self, slot: usize, to: Site, to_idx: usize) {
        let from_idx = self.window.index(&self.positions[slot]).expect("particle inside window");
        let cell = &mut self.cells[from_idx];
        let k = cell.iter().position(|&s| s as usize == slot).expect("slot present at its site");
        cell.swap_remove(k);
        self.cells[to_idx].push(slot as u32);
        self.positions[slot] = to;
    }

    /// Apply a recorded jump. Used by replay.
    pub(crate) fn apply(&mut self, ev: &JumpEvent) -> Result<()> {
        let slot = self.slot_of(&ev.particle).ok_or_else(|| Error::UnknownParticle(ev.particle.to_string()))?;
        if self.positions[slot] != ev.from || ev.to.sub(&ev.from).l1_norm() != 1 || ev.time < self.time {
            return Err(invalid("event", format!("inconsistent jump {ev:?}")));
        }
        let to_idx = self
            .window
            .index(&ev.to)
            .ok_or_else(|| invalid("event", format!("jump leaves window: {ev:?}")))?;
        self.move_slot(slot, ev.to, to_idx);
        self.time = ev.time;
        Ok(())
    }

    pub(crate) fn set_time(&mut self, t: f64) {
        self.time = t;
    }
}

fn holding(site_rate: Option<fn(&Site) -> f64>, at: &Site, rng: &mut ChaCha8Rng) -> f64 {
    let w: f64 = Exp1.sample(rng);
    match site_rate {
        Some(f) => w / f(at),
        None => w,
    }
}

#[derive(Clone, Copy, Debug)]
struct Pending {
    time: f64,
    slot: u32,
}

impl PartialEq for Pending {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Pending {}
impl PartialOrd for Pending {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Pending {
    fn cmp(&self, o: &Self) -> Ordering {
        self.time.total_cmp(&o.time).then(self.slot.cmp(&o.slot))
    }
}

/// Single-threaded event-driven evolution of one configuration.
pub struct Engine {
    law: JumpDistribution,
    cfg: Configuration,
    rngs: Vec<ChaCha8Rng>,
    heap: BinaryHeap<Reverse<Pending>>,
    jumps: Vec<u32>,
    exits: u64,
    site_rate: Option<fn(&Site) -> f64>,
}

impl Engine {
    /// `walks` names the graphical construction: two engines with the same
    /// `walks` move every shared particle identically.
    pub fn new(law: &JumpDistribution, cfg: Configuration, walks: &RandomSource) -> Result<Self> {
        Engine::build(law, cfg, walks, None)
    }

    pub(crate) fn build(
        law: &JumpDistribution,
        cfg: Configuration,
        walks: &RandomSource,
        site_rate: Option<fn(&Site) -> f64>,
    ) -> Result<Self> {
        if law.dim() != cfg.window.dim() {
            return Err(invalid("law", format!("dimension {} but window has {}", law.dim(), cfg.window.dim())));
        }
        let n = cfg.len();
        let mut e = Engine {
            law: law.clone(),
            rngs: Vec::with_capacity(n),
            heap: BinaryHeap::with_capacity(n),
            jumps: vec![0; n],
            exits: 0,
            site_rate,
            cfg,
        };
        for slot in 0..n {
            let mut rng = walks.particle(&e.cfg.ids[slot]).rng();
            let t0 = e.cfg.time + holding(site_rate, &e.cfg.positions[slot], &mut rng);
            e.rngs.push(rng);
            if !e.cfg.frozen[slot] {
                e.heap.push(Reverse(Pending { time: t0, slot: slot as u32 }));
            }
        }
        Ok(e)
    }

    pub fn law(&self) -> &JumpDistribution {
        &self.law
    }

    pub fn config(&self) -> &Configuration {
        &self.cfg
    }

    pub fn into_config(self) -> Configuration {
        self.cfg
    }

    pub fn time(&self) -> f64 {
        self.cfg.time
    }

    /// Jumps performed by the particle in `slot` so far.
    pub fn jump_count(&self, slot: usize) -> u32 {
        self.jumps[slot]
    }

    /// Attempted exits from the window (each freezes the particle).
    pub fn exits(&self) -> u64 {
        self.exits
    }

    /// Time of the next pending jump, if any.
    pub fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|r| r.0.time)
    }

    /// Next jump at or before `until`; otherwise advance the clock to `until`.
    pub fn next_event(&mut self, until: f64) -> Option<JumpEvent> {
        loop {
            let top = match self.heap.peek() {
                Some(&Reverse(p)) if p.time <= until => p,
                _ => {
                    self.cfg.time = self.cfg.time.max(until);
                    return None;
                }
            };
            self.heap.pop();
            let slot = top.slot as usize;
            let dir = self.law.sample(&mut self.rngs[slot]);
            let from = self.cfg.positions[slot];
            let to = from.step(dir);
            self.cfg.time = top.time;
            let Some(to_idx) = self.cfg.window.index(&to) else {
                self.cfg.frozen[slot] = true;
                self.exits += 1;
                continue;
            };
            self.cfg.move_slot(slot, to, to_idx);
            self.jumps[slot] += 1;
            let next = top.time + holding(self.site_rate, &to, &mut self.rngs[slot]);
            self.heap.push(Reverse(Pending { time: next, slot: top.slot }));
            return Some(JumpEvent { time: top.time, particle: self.cfg.ids[slot], slot: top.slot, from, to });
        }
    }

    /// Run to `until`, handing every jump to `sink` after it is applied.
    pub fn evolve<F: FnMut(&JumpEvent, &Configuration)>(&mut self, until: f64, mut sink: F) -> u64 {
        assert!(until >= self.cfg.time, "cannot evolve backwards from {} to {until}", self.cfg.time);
        let mut n = 0;
        while let Some(ev) = self.next_event(until) {
            sink(&ev, &self.cfg);
            n += 1;
        }
        n
    }
}

/// Sampler for walk increments over a fixed time step: the number of jumps
/// in each direction over `dt` are independent Poisson(`p(dir) dt`).
#[derive(Clone, Debug)]
pub struct IncrementSampler {
    per_direction: Vec<(usize, i64, Poisson<f64>)>,
    dim: usize,
}

impl IncrementSampler {
    pub fn new(law: &JumpDistribution, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(invalid("dt", format!("{dt} must be positive")));
        }
        let per_direction = law
            .directions()
            .map(|(d, p)| {
                let pois = Poisson::new(p * dt).expect("positive rate");
                (d.axis as usize, if d.positive { 1 } else { -1 }, pois)
            })
            .collect();
        Ok(IncrementSampler { per_direction, dim: law.dim() })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Site {
        let mut c = [0i64; crate::lattice::MAX_DIM];
        for (axis, sign, pois) in &self.per_direction {
            c[*axis] += sign * pois.sample(rng) as i64;
        }
        Site::new(&c[..self.dim])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn line(r: i64) -> SiteBox {
        SiteBox::centered(1, r)
    }

    #[test]
    fn zero_density_is_empty() {
        let c = Configuration::poisson(0.0, &line(10), line(10), &RandomSource::new(1)).unwrap();
        assert!(c.is_empty());
    }

    #[test]
    fn poisson_total_within_four_sigma() {
        let region = SiteBox::cube(1, 0, 9_999);
        let c = Configuration::poisson(2.0, &region, region, &RandomSource::new(3)).unwrap();
        let mean = 2.0e4;
        assert!((c.len() as f64 - mean).abs() < 4.0 * mean.sqrt(), "{}", c.len());
    }

    #[test]
    fn keyed_cloud_fits_poisson_and_extends() {
        let small = SiteBox::cube(2, -20, 20);
        let big = SiteBox::cube(2, -200, 200);
        let src = RandomSource::new(17);
        let a = Configuration::poisson_keyed(1.5, &small, small, &src).unwrap();
        let b = Configuration::poisson_keyed(1.5, &big, big, &src).unwrap();
        assert!(small.sites().all(|s| a.count(&s) == b.count(&s)));
        let mut hist = [0u64; 8];
        for s in big.sites() {
            hist[b.count(&s).min(7)] += 1;
        }
        let stat = crate::stats::chi_square_poisson(&hist, 1.5, big.volume());
        assert!(stat.p_value > 0.01, "{stat:?} {hist:?}");
    }

    #[test]
    fn per_site_histogram_fits_poisson() {
        let region = SiteBox::cube(1, 0, 99_999);
        let c = Configuration::poisson(1.0, &region, region, &RandomSource::new(5)).unwrap();
        let mut hist = [0u64; 6];
        for s in region.sites() {
            hist[c.count(&s).min(5)] += 1;
        }
        let stat = crate::stats::chi_square_poisson(&hist, 1.0, 1e5 as u64);
        let p = 1.0 - ChiSquared::new(stat.dof as f64).unwrap().cdf(stat.statistic);
        assert!(p > 0.01, "p = {p}, {hist:?}");
    }

    #[test]
    fn capacity_error_is_explicit() {
        let region = SiteBox::cube(2, 0, 3_999);
        let err = Configuration::poisson(5.0, &region, region, &RandomSource::new(1)).unwrap_err();
        assert!(matches!(err, Error::Capacity { .. }), "{err}");
    }

    #[test]
    fn evolve_to_current_time_is_a_no_op() {
        let law = JumpDistribution::one_dim(0.25).unwrap();
        let c = Configuration::poisson(1.0, &line(5), line(20), &RandomSource::new(9)).unwrap();
        let mut e = Engine::new(&law, c.clone(), &RandomSource::new(9)).unwrap();
        assert_eq!(e.evolve(0.0, |_, _| panic!("no events expected")), 0);
        assert_eq!(e.config(), &c);
    }

    #[test]
    fn events_are_ordered_nearest_neighbour_and_consistent() {
        let law = JumpDistribution::new(vec![0.1, 0.2], vec![0.3, 0.4]).unwrap();
        let w = SiteBox::centered(2, 12);
        let c = Configuration::poisson(1.5, &SiteBox::centered(2, 4), w, &RandomSource::new(2)).unwrap();
        let mut e = Engine::new(&law, c, &RandomSource::new(2)).unwrap();
        let mut last = 0.0;
        e.evolve(10.0, |ev, cfg| {
            assert!(ev.time >= last);
            last = ev.time;
            assert_eq!(ev.to.sub(&ev.from).l1_norm(), 1);
            assert_eq!(cfg.position(ev.slot as usize), ev.to);
            assert!(cfg.slots_at(&ev.to).contains(&ev.slot));
        });
        let cfg = e.config();
        let total: usize = cfg.occupied().map(|(_, n)| n).sum();
        assert_eq!(total, cfg.len());
    }

    #[test]
    fn single_walker_drift_and_jump_count() {
        let law = JumpDistribution::one_dim(0.25).unwrap();
        let t = 100.0;
        let reps = 10_000u64;
        let (mut sx, mut sj, mut sj2) = (0.0, 0.0, 0.0);
        for r in 0..reps {
            let src = RandomSource::new(17).replica(r);
            let o = Site::origin(1);
            let c = Configuration::from_counts(line(400), &[(o, 1)], None).unwrap();
            let mut e = Engine::new(&law, c, &src).unwrap();
            e.evolve(t, |_, _| {});
            sx += e.config().position(0).first() as f64;
            let j = e.jump_count(0) as f64;
            sj += j;
            sj2 += j * j;
        }
        let n = reps as f64;
        let mean_x = sx / n;
        // Var X_t = t for a rate-1 nearest-neighbour walk
        assert!((mean_x / t + 0.5).abs() < 4.0 * (t / n).sqrt() / t, "{mean_x}");
        let mean_j = sj / n;
        let var_j = sj2 / n - mean_j * mean_j;
        assert!((mean_j - t).abs() < 4.0 * (t / n).sqrt(), "{mean_j}");
        // Var of the sample variance of Poisson(t): (mu4 - sigma^4)/n with mu4 = t + 3t^2
        let sd_var = ((t + 3.0 * t * t - t * t) / n).sqrt();
        assert!((var_j - t).abs() < 4.0 * sd_var, "{var_j}");
    }

    #[test]
    fn shared_walks_move_shared_particles_identically() {
        let law = JumpDistribution::one_dim(0.4).unwrap();
        let w = line(60);
        let walks = RandomSource::new(8);
        let hi = Configuration::poisson(2.0, &line(10), w, &walks).unwrap();
        let lo = hi.thinned(0.5, &walks).unwrap();
        let mut a = Engine::new(&law, hi, &walks).unwrap();
        let mut b = Engine::new(&law, lo, &walks).unwrap();
        a.evolve(15.0, |_, _| {});
        b.evolve(15.0, |_, _| {});
        for (slot, id) in b.config().ids().iter().enumerate() {
            let s = a.config().slot_of(id).unwrap();
            assert_eq!(a.config().position(s), b.config().position(slot));
        }
    }

    #[test]
    fn window_exit_freezes_and_is_counted() {
        let law = JumpDistribution::one_dim(0.25).unwrap();
        let c = Configuration::from_counts(line(2), &[(Site::origin(1), 5)], None).unwrap();
        let mut e = Engine::new(&law, c, &RandomSource::new(4)).unwrap();
        e.evolve(200.0, |_, _| {});
        assert_eq!(e.exits(), 5);
        assert_eq!(e.config().frozen_count(), 5);
        assert_eq!(e.config().len(), 5);
    }

    #[test]
    fn increment_sampler_mean() {
        let law = JumpDistribution::one_dim(0.25).unwrap();
        let s = IncrementSampler::new(&law, 10.0).unwrap();
        let mut rng = RandomSource::new(1).rng();
        let n = 20_000;
        let m: f64 = (0..n).map(|_| s.sample(&mut rng).first() as f64).sum::<f64>() / n as f64;
        assert!((m + 5.0).abs() < 4.0 * (10.0 / n as f64).sqrt());
    }
}
