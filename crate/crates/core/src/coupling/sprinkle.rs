//! Sprinkled pairing coupling of a density-`rho` system with a slightly denser one.
//!
//! `eta` follows the walks `S`. Each particle of `eta*` follows its own walk
//! from an independent family `S'` until it meets its current partner in
//! `eta`, after which it copies the partner's moves. Partners are reassigned
//! at the rematch times `s_k`, box by box: same-site pairs first, then a
//! sweep in lexicographic site order. Merged pairs are kept.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::engine::{Configuration, ParticleId, RandomSource};
use crate::error::{invalid, Error, Result};
use crate::lattice::{JumpDistribution, Site, SiteBox, MAX_DIM};
use crate::stats::{chi_square_poisson, correlation, poisson_pmf, wilson_ci, ChiSquareStat, Interval};

/// Exponent `d / (4 sqrt(d + 2))` of the sprinkling.
pub fn sprinkle_exponent(dim: usize) -> f64 {
    dim as f64 / (4.0 * ((dim + 2) as f64).sqrt())
}

/// `rho (1 + t^{-d / (4 sqrt(d + 2))})`.
pub fn sprinkled_density(rho: f64, t: f64, dim: usize) -> f64 {
    rho * (1.0 + t.powf(-sprinkle_exponent(dim)))
}

/// Rematch times, box geometry and densities for one horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SprinkleSchedule {
    pub horizon: f64,
    pub rho: f64,
    pub rho_star: f64,
    pub meeting_window_c: f64,
    pub rematch_times: Vec<f64>,
    pub box_side: i64,
    pub target: SiteBox,
    pub halo: SiteBox,
    box_lo: Vec<i64>,
    box_hi: Vec<i64>,
}

impl SprinkleSchedule {
    pub fn new(rho: f64, horizon: f64, target: SiteBox, meeting_window_c: f64) -> Result<Self> {
        let d = target.dim();
        if !(rho > 0.0) {
            return Err(invalid("rho", format!("{rho} must be positive")));
        }
        if !(meeting_window_c > 0.0) {
            return Err(invalid("meeting_window_c", format!("{meeting_window_c} must be positive")));
        }
        let df = d as f64;
        let side_scale = meeting_window_c / (2.0 * df.sqrt());
        let min_horizon = (1.0f64).max((1.0 / side_scale).powf((df + 2.0).sqrt()));
        let rematches = horizon.powf((df + 1.0) / (df + 2.0)).floor();
        let box_side = (side_scale * horizon.powf(1.0 / (df + 2.0).sqrt())).floor() as i64;
        if !(horizon >= min_horizon) || rematches < 1.0 || box_side < 1 {
            return Err(Error::DegenerateSchedule { horizon, min_horizon });
        }
        let step = horizon.powf(1.0 / (df + 2.0));
        let rematch_times = (0..=rematches as u64).map(|k| k as f64 * step).collect();
        let reach = (3.0 * rho * horizon).ceil() as i64;
        let mut box_lo = Vec::with_capacity(d);
        let mut box_hi = Vec::with_capacity(d);
        let mut lo = [0i64; MAX_DIM];
        let mut hi = [0i64; MAX_DIM];
        for i in 0..d {
            let a = (target.lo.coords()[i] - reach).div_euclid(box_side);
            let b = (target.hi.coords()[i] + reach).div_euclid(box_side);
            box_lo.push(a);
            box_hi.push(b);
            lo[i] = a * box_side;
            hi[i] = (b + 1) * box_side - 1;
        }
        let halo = SiteBox::new(Site::new(&lo[..d]), Site::new(&hi[..d]))?;
        Ok(SprinkleSchedule {
            horizon,
            rho,
            rho_star: sprinkled_density(rho, horizon, d),
            meeting_window_c,
            rematch_times,
            box_side,
            target,
            halo,
            box_lo,
            box_hi,
        })
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.rho < 1.0 {
            w.push(format!("rho = {} is below 1; the domination guarantee is only claimed for rho >= 1", self.rho));
        }
        w
    }

    pub fn box_count(&self) -> usize {
        self.box_lo.iter().zip(&self.box_hi).map(|(a, b)| (b - a + 1) as usize).product()
    }

    /// Linear index of the box `H(i)` containing `x`, if `i` belongs to the index set.
    pub fn box_of(&self, x: &Site) -> Option<usize> {
        let mut idx = 0usize;
        for (i, &c) in x.coords().iter().enumerate() {
            let b = c.div_euclid(self.box_side);
            if b < self.box_lo[i] || b > self.box_hi[i] {
                return None;
            }
            idx = idx * (self.box_hi[i] - self.box_lo[i] + 1) as usize + (b - self.box_lo[i]) as usize;
        }
        Some(idx)
    }

    /// Exact probability that a single box has `eta*` count at most the `eta` count at time 0.
    pub fn box_inversion_probability(&self) -> f64 {
        let vol = (self.box_side as f64).powi(self.dim() as i32);
        count_inversion_probability(self.rho * vol, self.rho_star * vol)
    }

    /// Union bound on the probability of a count inversion in some box at time 0.
    pub fn inversion_union_bound(&self) -> f64 {
        (self.box_count() as f64 * self.box_inversion_probability()).min(1.0)
    }
}

/// `P[Y <= X]` for independent `X ~ Poisson(mu_x)`, `Y ~ Poisson(mu_y)`.
pub fn count_inversion_probability(mu_x: f64, mu_y: f64) -> f64 {
    let hi = (mu_x.max(mu_y) + 12.0 * mu_x.max(mu_y).sqrt() + 30.0) as u64;
    let mut cdf_y = 0.0;
    let mut total = 0.0;
    for k in 0..=hi {
        cdf_y += poisson_pmf(mu_y, k);
        total += poisson_pmf(mu_x, k) * cdf_y.min(1.0);
    }
    total.min(1.0)
}

/// Smallest constant on a grid of step `0.5` whose union bound on a time-0
/// count inversion is at most `max_inversion`.
pub fn calibrate_meeting_window(rho: f64, horizon: f64, target: SiteBox, max_inversion: f64) -> Result<f64> {
    for k in 1..=400 {
        let c = k as f64 * 0.5;
        if let Ok(s) = SprinkleSchedule::new(rho, horizon, target, c) {
            if s.inversion_union_bound() <= max_inversion {
                return Ok(c);
            }
        }
    }
    Err(invalid("meeting_window_c", format!("no constant up to 200 reaches {max_inversion}")))
}

struct Walker {
    pos: Site,
    next: f64,
    rng: ChaCha8Rng,
}

impl Walker {
    fn new(pos: Site, source: &RandomSource, id: &ParticleId) -> Self {
        let mut rng = source.particle(id).rng();
        let next = Exp1.sample(&mut rng);
        Walker { pos, next, rng }
    }

    fn step(&mut self, law: &JumpDistribution) -> f64 {
        let t = self.next;
        self.pos = self.pos.step(law.sample(&mut self.rng));
        let w: f64 = Exp1.sample(&mut self.rng);
        self.next += w;
        t
    }

    fn advance(&mut self, law: &JumpDistribution, until: f64, path: Option<&mut Vec<(f64, Site)>>) {
        match path {
            Some(p) => {
                while self.next <= until {
                    let t = self.step(law);
                    p.push((t, self.pos));
                }
            }
            None => {
                while self.next <= until {
                    self.step(law);
                }
            }
        }
    }
}

/// Everything one replica reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SprinkleOutcome {
    pub dominated_on_h: bool,
    pub failure_sites: Vec<Site>,
    pub bad_a: bool,
    /// Count inversion flags at each rematch time.
    pub bad_b: Vec<bool>,
    /// A bad event forced independent evolution of `eta*`.
    pub fallback: bool,
    /// Merged pairs right after each rematch, then at the horizon.
    pub merged_counts: Vec<usize>,
    /// Merged pairs found on different sites at a rematch (must be zero).
    pub merged_separations: u64,
    pub eta_particles: usize,
    pub star_particles: usize,
    pub eta0_hist: Vec<u64>,
    pub star0_hist: Vec<u64>,
    pub eta_final_on_h: Vec<u32>,
    pub star_final_on_h: Vec<u32>,
    pub star0_on_h: u64,
}

const HIST_CELLS: usize = 16;

fn histogram(cfg: &Configuration, region: &SiteBox) -> Vec<u64> {
    let mut h = vec![0u64; HIST_CELLS];
    for s in region.sites() {
        h[cfg.count(&s).min(HIST_CELLS - 1)] += 1;
    }
    h
}

struct Systems<'a> {
    law: &'a JumpDistribution,
    sched: &'a SprinkleSchedule,
    eta: Vec<Walker>,
    star: Vec<Walker>,
    eta_partner: Vec<Option<u32>>,
    star_partner: Vec<Option<u32>>,
    merged: Vec<bool>,
    eta_left_halo: Vec<bool>,
    paths: Vec<Vec<(f64, Site)>>,
    bad_b: Vec<bool>,
    merged_counts: Vec<usize>,
    separations: u64,
}

impl Systems<'_> {
    fn inversion(&self) -> bool {
        let n = self.sched.box_count();
        let mut counts = vec![(0u64, 0u64); n];
        for w in &self.eta {
            if let Some(b) = self.sched.box_of(&w.pos) {
                counts[b].0 += 1;
            }
        }
        for w in &self.star {
            if let Some(b) = self.sched.box_of(&w.pos) {
                counts[b].1 += 1;
            }
        }
        counts.iter().any(|(e, s)| s <= e)
    }

    fn rematch(&mut self) {
        for j in 0..self.star.len() {
            if let Some(i) = self.star_partner[j] {
                if self.merged[j] {
                    if self.star[j].pos != self.eta[i as usize].pos {
                        self.separations += 1;
                    }
                } else {
                    self.star_partner[j] = None;
                    self.eta_partner[i as usize] = None;
                }
            }
        }
        // per box, per site: free eta and free eta* particles in id order
        type Cell = (Vec<u32>, Vec<u32>);
        let mut boxes: BTreeMap<usize, BTreeMap<Site, Cell>> = BTreeMap::new();
        for (i, w) in self.eta.iter().enumerate() {
            if self.eta_partner[i].is_none() {
                if let Some(b) = self.sched.box_of(&w.pos) {
                    boxes.entry(b).or_default().entry(w.pos).or_default().0.push(i as u32);
                }
            }
        }
        for (j, w) in self.star.iter().enumerate() {
            if self.star_partner[j].is_none() {
                if let Some(b) = self.sched.box_of(&w.pos) {
                    boxes.entry(b).or_default().entry(w.pos).or_default().1.push(j as u32);
                }
            }
        }
        for sites in boxes.values_mut() {
            for (e, s) in sites.values_mut() {
                let k = e.len().min(s.len());
                for (&i, &j) in e[..k].iter().zip(&s[..k]) {
                    self.pair(i, j, true);
                }
                e.drain(..k);
                s.drain(..k);
            }
            let mut eta_stack: Vec<u32> = Vec::new();
            let mut star_stack: Vec<u32> = Vec::new();
            for (e, s) in sites.values() {
                for &i in e {
                    match star_stack.pop() {
                        Some(j) => self.pair(i, j, false),
                        None => eta_stack.push(i),
                    }
                }
                for &j in s {
                    match eta_stack.pop() {
                        Some(i) => self.pair(i, j, false),
                        None => star_stack.push(j),
                    }
                }
            }
        }
        self.merged_counts.push(self.merged.iter().filter(|&&m| m).count());
    }

    fn pair(&mut self, i: u32, j: u32, merged: bool) {
        self.eta_partner[i as usize] = Some(j);
        self.star_partner[j as usize] = Some(i);
        self.merged[j as usize] = merged;
    }

    fn advance(&mut self, until: f64, coupled: bool) {
        let law = self.law;
        for i in 0..self.eta.len() {
            let chase = coupled && self.eta_partner[i].is_some_and(|j| !self.merged[j as usize]);
            if chase {
                let p = &mut self.paths[i];
                p.clear();
                p.push((f64::NEG_INFINITY, self.eta[i].pos));
                self.eta[i].advance(law, until, Some(p));
            } else {
                self.eta[i].advance(law, until, None);
            }
        }
        for j in 0..self.star.len() {
            match self.star_partner[j] {
                Some(i) if coupled && self.merged[j] => self.star[j].pos = self.eta[i as usize].pos,
                Some(i) if coupled => {
                    let i = i as usize;
                    let path = &self.paths[i];
                    let mut ep = path[0].1;
                    let mut idx = 1;
                    let w = &mut self.star[j];
                    let mut met = ep == w.pos;
                    while !met {
                        let te = path.get(idx).map_or(f64::INFINITY, |e| e.0);
                        let ts = if w.next <= until { w.next } else { f64::INFINITY };
                        if te.is_infinite() && ts.is_infinite() {
                            break;
                        }
                        if te <= ts {
                            ep = path[idx].1;
                            idx += 1;
                        } else {
                            w.step(law);
                        }
                        met = ep == w.pos;
                    }
                    if met {
                        self.merged[j] = true;
                        self.star[j].pos = self.eta[i].pos;
                    }
                }
                _ => self.star[j].advance(law, until, None),
            }
        }
    }
}

/// One replica of the sprinkled coupling.
pub fn run_sprinkled(law: &JumpDistribution, sched: &SprinkleSchedule, source: &RandomSource) -> Result<SprinkleOutcome> {
    if law.dim() != sched.dim() {
        return Err(invalid("law", "dimension differs from the target box"));
    }
    let eta0 = Configuration::poisson(sched.rho, &sched.halo, sched.halo, &source.derive_label("eta"))?;
    let star0 = Configuration::poisson(sched.rho_star, &sched.halo, sched.halo, &source.derive_label("eta_star"))?;
    let first = simulate(law, sched, &eta0, &star0, source, false)?;
    let (mut sys, mut fallback) = first;
    let bad_a = sys.eta.iter().zip(&sys.eta_left_halo).any(|(w, &out)| out && sched.target.contains(&w.pos));
    if bad_a && !fallback {
        let again = simulate(law, sched, &eta0, &star0, source, true)?;
        sys = again.0;
        fallback = true;
    }
    let mut failure_sites = Vec::new();
    let mut eta_final_on_h = Vec::new();
    let mut star_final_on_h = Vec::new();
    let count_at = |ws: &[Walker]| {
        let mut m: BTreeMap<Site, u32> = BTreeMap::new();
        for w in ws {
            if sched.target.contains(&w.pos) {
                *m.entry(w.pos).or_insert(0) += 1;
            }
        }
        m
    };
    let ec = count_at(&sys.eta);
    let sc = count_at(&sys.star);
    for x in sched.target.sites() {
        let e = ec.get(&x).copied().unwrap_or(0);
        let s = sc.get(&x).copied().unwrap_or(0);
        if s < e {
            failure_sites.push(x);
        }
        eta_final_on_h.push(e);
        star_final_on_h.push(s);
    }
    let mut merged_counts = sys.merged_counts.clone();
    merged_counts.push(sys.merged.iter().filter(|&&m| m).count());
    Ok(SprinkleOutcome {
        dominated_on_h: failure_sites.is_empty(),
        failure_sites,
        bad_a,
        bad_b: sys.bad_b.clone(),
        fallback,
        merged_counts,
        merged_separations: sys.separations,
        eta_particles: eta0.len(),
        star_particles: star0.len(),
        eta0_hist: histogram(&eta0, &sched.halo),
        star0_hist: histogram(&star0, &sched.halo),
        eta_final_on_h,
        star_final_on_h,
        star0_on_h: star0.count_in(&sched.target) as u64,
    })
}

fn simulate<'a>(
    law: &'a JumpDistribution,
    sched: &'a SprinkleSchedule,
    eta0: &Configuration,
    star0: &Configuration,
    source: &RandomSource,
    force_fallback: bool,
) -> Result<(Systems<'a>, bool)> {
    let walks = source.derive_label("walks");
    let walks_prime = source.derive_label("walks_prime");
    let eta: Vec<Walker> =
        eta0.ids().iter().zip(eta0.positions()).map(|(id, &p)| Walker::new(p, &walks, id)).collect();
    let star: Vec<Walker> =
        star0.ids().iter().zip(star0.positions()).map(|(id, &p)| Walker::new(p, &walks_prime, id)).collect();
    let (ne, ns) = (eta.len(), star.len());
    let mut sys = Systems {
        law,
        sched,
        eta,
        star,
        eta_partner: vec![None; ne],
        star_partner: vec![None; ns],
        merged: vec![false; ns],
        eta_left_halo: vec![false; ne],
        paths: (0..ne).map(|_| Vec::new()).collect(),
        bad_b: Vec::new(),
        merged_counts: Vec::new(),
        separations: 0,
    };
    let b0 = sys.inversion();
    sys.bad_b.push(b0);
    let coupled = !(force_fallback || b0);
    if coupled {
        sys.rematch();
    } else {
        sys.merged_counts.push(0);
    }
    let times = &sched.rematch_times;
    for k in 0..times.len() {
        let until = times.get(k + 1).copied().unwrap_or(sched.horizon);
        sys.advance(until, coupled);
        if k + 1 < times.len() {
            for (i, w) in sys.eta.iter().enumerate() {
                if !sched.halo.contains(&w.pos) {
                    sys.eta_left_halo[i] = true;
                }
            }
            let b = sys.inversion();
            sys.bad_b.push(b);
            if coupled {
                sys.rematch();
            } else {
                sys.merged_counts.push(0);
            }
        }
    }
    Ok((sys, !coupled))
}

/// Pooled statistics over replicas of one schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SprinkleSummary {
    pub replicas: u64,
    pub failures: u64,
    pub failure_ci: Interval,
    pub fallbacks: u64,
    pub bad_a: u64,
    pub bad_b0: u64,
    /// Replicas whose merged-pair counts decreased somewhere.
    pub merged_decreases: u64,
    pub merged_separations: u64,
    pub eta_initial_fit: ChiSquareStat,
    pub star_initial_fit: ChiSquareStat,
    pub eta_final_fit: ChiSquareStat,
    pub star_final_fit: ChiSquareStat,
    /// Correlation of the initial `eta*` mass on `H` with the final `eta` mass on `H`.
    pub independence_corr: f64,
}

impl SprinkleSummary {
    pub fn new(sched: &SprinkleSchedule, outcomes: &[SprinkleOutcome], level: f64) -> Self {
        let n = outcomes.len() as u64;
        let count = |f: &dyn Fn(&SprinkleOutcome) -> bool| outcomes.iter().filter(|o| f(o)).count() as u64;
        let failures = count(&|o| !o.dominated_on_h);
        let pool = |f: &dyn Fn(&SprinkleOutcome) -> &Vec<u64>| {
            let mut h = vec![0u64; HIST_CELLS];
            for o in outcomes {
                for (a, b) in h.iter_mut().zip(f(o)) {
                    *a += b;
                }
            }
            h
        };
        let final_hist = |f: &dyn Fn(&SprinkleOutcome) -> &Vec<u32>| {
            let mut h = vec![0u64; HIST_CELLS];
            for o in outcomes {
                for &c in f(o) {
                    h[(c as usize).min(HIST_CELLS - 1)] += 1;
                }
            }
            h
        };
        let fit = |h: Vec<u64>, rho: f64| {
            let total = h.iter().sum();
            chi_square_poisson(&h, rho, total)
        };
        let xs: Vec<f64> = outcomes.iter().map(|o| o.star0_on_h as f64).collect();
        let ys: Vec<f64> = outcomes.iter().map(|o| o.eta_final_on_h.iter().sum::<u32>() as f64).collect();
        SprinkleSummary {
            replicas: n,
            failures,
            failure_ci: wilson_ci(failures, n, level),
            fallbacks: count(&|o| o.fallback),
            bad_a: count(&|o| o.bad_a),
            bad_b0: count(&|o| o.bad_b.first().copied().unwrap_or(false)),
            merged_decreases: count(&|o| o.merged_counts.windows(2).any(|w| w[1] < w[0])),
            merged_separations: outcomes.iter().map(|o| o.merged_separations).sum(),
            eta_initial_fit: fit(pool(&|o| &o.eta0_hist), sched.rho),
            star_initial_fit: fit(pool(&|o| &o.star0_hist), sched.rho_star),
            eta_final_fit: fit(final_hist(&|o| &o.eta_final_on_h), sched.rho),
            star_final_fit: fit(final_hist(&|o| &o.star_final_on_h), sched.rho_star),
            independence_corr: correlation(&xs, &ys),
        }
    }
}
