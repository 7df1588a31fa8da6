//! Monte Carlo estimators for the elementary bad events and the box events.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ladder::{RenormBox, ScaleLadder};
use crate::engine::{truncation_slack, Configuration, Engine, ParticleId, RandomSource, MAX_WINDOW_SITES};
use crate::error::{invalid, Error, Result};
use crate::infection::InfectionState;
use crate::lattice::{JumpDistribution, Site, SiteBox};
use crate::stats::{two_proportion_z, wilson_ci, Interval};

/// Largest `rho * |window| * horizon` any single run may cost.
pub const MAX_EXPECTED_JUMPS: f64 = 2.0e9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frequency {
    pub hits: u64,
    pub replicas: u64,
    pub value: f64,
    pub ci: Interval,
}

impl Frequency {
    pub fn new(hits: u64, replicas: u64) -> Self {
        let value = if replicas == 0 { 0.0 } else { hits as f64 / replicas as f64 };
        Frequency { hits, replicas, value, ci: wilson_ci(hits, replicas, 0.95) }
    }

    /// One-sided test that `self` is larger than `other` at level `1 - alpha`.
    pub fn exceeds(&self, other: &Frequency, alpha: f64) -> bool {
        let z = two_proportion_z(self.hits, self.replicas, other.hits, other.replicas);
        z.is_finite() && z > crate::stats::z_for_level(1.0 - 2.0 * alpha)
    }
}

fn check_density(rho: f64, l: u64) -> Result<()> {
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(invalid("rho", format!("{rho} must be finite and nonnegative")));
    }
    if rho > (l as f64).powi(2) {
        return Err(invalid("rho", format!("{rho} exceeds L^2 = {}", l * l)));
    }
    Ok(())
}

/// Where the infection starts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Start {
    /// Particles at the origin at time 0 plus the extra particle.
    Main,
    /// Particles found at the origin at time `at`, without an extra particle.
    Restart { at: f64 },
}

impl Start {
    fn time(&self) -> f64 {
        match self {
            Start::Main => 0.0,
            Start::Restart { at } => *at,
        }
    }
}

/// What one spreading run reports, relative to its start site and time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    /// Largest `l_inf` distance from the start site reached by the infection.
    pub range: i64,
    /// Front at the end of the run.
    pub front: i64,
    /// Half-width of the region the run was resolved in.
    pub core: i64,
    pub particles: usize,
}

/// Run the infection for `duration` after its start in windows of growing
/// size until its range is resolved up to `need`. Each entry of `keeps`
/// gives one coupled system, thinned from the first by that factor.
pub(crate) fn spread_family(
    law: &JumpDistribution,
    rho: f64,
    keeps: &[f64],
    start: Start,
    duration: f64,
    need: i64,
    target_error: f64,
    source: &RandomSource,
) -> Result<Vec<Spread>> {
    let d = law.dim();
    let total = start.time() + duration;
    let mut core = need.min((3.0 * total).ceil() as i64 + 1).max(1);
    loop {
        let core_box = SiteBox::centered(d, core);
        let slack = truncation_slack(rho, total, &core_box, target_error)?;
        let window = SiteBox::centered(d, core + slack);
        if window.volume() > MAX_WINDOW_SITES {
            return Err(Error::WindowTooSmall(format!("{} sites exceed {MAX_WINDOW_SITES}", window.volume())));
        }
        let cost = rho * window.volume() as f64 * total;
        if cost > MAX_EXPECTED_JUMPS {
            return Err(Error::Capacity { what: "expected jumps", requested: cost as u64, limit: MAX_EXPECTED_JUMPS as u64 });
        }
        let mut dense = Configuration::poisson_keyed(rho, &window, window, &source.derive_label("init"))?;
        let o = Site::origin(d);
        if start == Start::Main {
            dense = dense.with_particle(ParticleId::extra_at(o), o)?;
        }
        let walks = source.derive_label("walks");
        let mut out = Vec::with_capacity(keeps.len());
        for (i, &keep) in keeps.iter().enumerate() {
            let cfg = if i == 0 { dense.clone() } else { dense.thinned(keep, &source.derive(i as u64))? };
            let particles = cfg.len();
            let mut e = Engine::new(law, cfg, &walks)?;
            e.evolve(start.time(), |_, _| {});
            let mut st = InfectionState::seed_at(e.config(), o);
            let mut err = None;
            e.evolve(total, |ev, c| {
                if let Err(x) = st.propagate(ev, c) {
                    err.get_or_insert(x);
                }
            });
            if let Some(x) = err {
                return Err(x);
            }
            st.set_time(total);
            out.push(Spread {
                range: st.infected_range(),
                front: st.front().unwrap_or(i64::MIN),
                core,
                particles,
            });
        }
        if out[0].range >= core && core < need {
            core = need.min(core.saturating_mul(2));
            continue;
        }
        return Ok(out);
    }
}

/// Report for the busy-site event `{eta_t(0) >= L^{d+4} for some t <= L}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BusySiteReport {
    pub rho: f64,
    pub scale: u64,
    pub threshold: u64,
    pub frequency: Frequency,
    /// `hist[n]` counts replicas whose maximal occupancy of the origin was `n`.
    pub max_occupancy_hist: Vec<u64>,
    pub max_occupancy: Vec<u32>,
}

/// Maximal occupancy of the origin over `[0, horizon]`, one per coupled system.
fn origin_occupancy(
    law: &JumpDistribution,
    rho: f64,
    keeps: &[f64],
    horizon: f64,
    target_error: f64,
    source: &RandomSource,
) -> Result<Vec<u32>> {
    let d = law.dim();
    let o = Site::origin(d);
    let slack = truncation_slack(rho, horizon, &SiteBox::centered(d, 0), target_error)?;
    let window = SiteBox::centered(d, slack);
    let dense = Configuration::poisson_keyed(rho, &window, window, &source.derive_label("init"))?;
    let walks = source.derive_label("walks");
    let mut out = Vec::new();
    for (i, &keep) in keeps.iter().enumerate() {
        let cfg = if i == 0 { dense.clone() } else { dense.thinned(keep, &source.derive(i as u64))? };
        let mut n = cfg.count(&o) as u32;
        let mut best = n;
        let mut e = Engine::new(law, cfg, &walks)?;
        e.evolve(horizon, |ev, _| {
            if ev.from == o {
                n -= 1;
            }
            if ev.to == o {
                n += 1;
                best = best.max(n);
            }
        });
        out.push(best);
    }
    Ok(out)
}

pub fn busy_site_estimate(
    law: &JumpDistribution,
    rho: f64,
    scale: u64,
    replicas: u64,
    source: &RandomSource,
) -> Result<BusySiteReport> {
    check_density(rho, scale)?;
    let threshold = scale.saturating_pow((law.dim() + 4) as u32);
    let target = 1e-3 / replicas.max(1) as f64;
    let max_occupancy: Vec<u32> = (0..replicas)
        .into_par_iter()
        .map(|r| origin_occupancy(law, rho, &[1.0], scale as f64, target, &source.replica(r)).map(|v| v[0]))
        .collect::<Result<_>>()?;
    let hits = max_occupancy.iter().filter(|&&m| m as u64 >= threshold).count() as u64;
    let top = max_occupancy.iter().copied().max().unwrap_or(0) as usize;
    let mut hist = vec![0u64; top + 1];
    for &m in &max_occupancy {
        hist[m as usize] += 1;
    }
    Ok(BusySiteReport {
        rho,
        scale,
        threshold,
        frequency: Frequency::new(hits, replicas),
        max_occupancy_hist: hist,
        max_occupancy,
    })
}

/// Coupled maximal occupancies at densities `rho_low <= rho_high`; returns the
/// number of replicas where the sparser system was busier.
pub fn busy_site_monotonicity(
    law: &JumpDistribution,
    rho_low: f64,
    rho_high: f64,
    horizon: f64,
    replicas: u64,
    source: &RandomSource,
) -> Result<u64> {
    if !(0.0..=rho_high).contains(&rho_low) || rho_high <= 0.0 {
        return Err(invalid("rho_low", format!("need 0 <= {rho_low} <= {rho_high}, rho_high > 0")));
    }
    let v: Vec<u64> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let m = origin_occupancy(law, rho_high, &[1.0, rho_low / rho_high], horizon, 1e-6, &source.replica(r))?;
            Ok((m[1] > m[0]) as u64)
        })
        .collect::<Result<_>>()?;
    Ok(v.iter().sum())
}

/// Frequency of the infection leaving `[-L^{exponent}, L^{exponent}]^d` before time `L`.
pub fn leave_box_estimate(
    law: &JumpDistribution,
    rho: f64,
    scale: u64,
    exponent: u32,
    replicas: u64,
    source: &RandomSource,
) -> Result<Frequency> {
    check_density(rho, scale)?;
    let half = (scale as i64).checked_pow(exponent).ok_or(Error::ScaleOverflow { k: 0 })?;
    let target = 1e-3 / replicas.max(1) as f64;
    let hits: Vec<u64> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let s = spread_family(law, rho, &[1.0], Start::Main, scale as f64, half + 1, target, &source.replica(r))?;
            Ok((s[0].range > half) as u64)
        })
        .collect::<Result<_>>()?;
    Ok(Frequency::new(hits.iter().sum(), replicas))
}

/// Per-replica outcome of the box events at one scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxOutcome {
    /// The infection never touched the boundary set.
    pub e: bool,
    /// The same with the velocity-7 boundary set.
    pub e_relaxed: bool,
    /// The infection reached the spatial shell.
    pub d: bool,
    pub range: i64,
    pub front: i64,
}

impl BoxOutcome {
    fn new(b: &RenormBox, s: &Spread) -> Self {
        let d = s.range >= b.half_width;
        let below = |v: f64| (s.front as f64) < v * b.duration;
        BoxOutcome {
            e: !d && below(b.velocity),
            e_relaxed: !d && below(7.0),
            d,
            range: s.range,
            front: s.front,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PkEstimate {
    pub k: usize,
    pub l0: u64,
    pub rho: f64,
    pub replicas: u64,
    pub p_hat: Frequency,
    pub p_relaxed: Frequency,
    pub fast_spread: Frequency,
    /// Replicas where the relaxed event held but the event itself did not.
    pub nesting_violations: u64,
    pub outcomes: Vec<BoxOutcome>,
}

/// Box events at scale `k` anchored at the origin and time `anchor_time`
/// (a multiple of `L_k`), under density `rho`.
pub fn estimate_box_events(
    law: &JumpDistribution,
    ladder: &ScaleLadder,
    k: usize,
    anchor_time: f64,
    rho: f64,
    replicas: u64,
    source: &RandomSource,
) -> Result<PkEstimate> {
    if k > ladder.k_max() {
        return Err(invalid("k", format!("{k} beyond the ladder's {}", ladder.k_max())));
    }
    if law.dim() != ladder.dim {
        return Err(invalid("law", "dimension differs from the ladder"));
    }
    let b = ladder.boxes(k)?;
    let start = if anchor_time == 0.0 { Start::Main } else { Start::Restart { at: anchor_time } };
    let target = 1e-3 / replicas.max(1) as f64;
    let outcomes: Vec<BoxOutcome> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let s = spread_family(law, rho, &[1.0], start, b.duration, b.half_width, target, &source.replica(r))?;
            Ok(BoxOutcome::new(&b, &s[0]))
        })
        .collect::<Result<_>>()?;
    let count = |f: fn(&BoxOutcome) -> bool| outcomes.iter().filter(|o| f(o)).count() as u64;
    Ok(PkEstimate {
        k,
        l0: ladder.scales[0] as u64,
        rho,
        replicas,
        p_hat: Frequency::new(count(|o| o.e), replicas),
        p_relaxed: Frequency::new(count(|o| o.e_relaxed), replicas),
        fast_spread: Frequency::new(count(|o| o.d), replicas),
        nesting_violations: count(|o| o.e_relaxed && !o.e),
        outcomes,
    })
}

/// `p_k` at the ladder density `rho_k`.
pub fn estimate_ek(
    law: &JumpDistribution,
    ladder: &ScaleLadder,
    k: usize,
    replicas: u64,
    source: &RandomSource,
) -> Result<PkEstimate> {
    estimate_box_events(law, ladder, k, 0.0, ladder.densities[k], replicas, source)
}

/// Samplewise monotonicity of the box events under thinning.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoxMonotonicity {
    pub replicas: u64,
    /// The event held in the denser system but failed in the sparser one.
    pub e_violations: u64,
    /// Fast spread in the sparser system but not in the denser one.
    pub d_violations: u64,
    /// Sparser front strictly ahead of the denser front.
    pub front_violations: u64,
}

pub fn box_event_monotonicity(
    law: &JumpDistribution,
    ladder: &ScaleLadder,
    k: usize,
    rho_low: f64,
    rho_high: f64,
    replicas: u64,
    source: &RandomSource,
) -> Result<BoxMonotonicity> {
    if !(0.0..=rho_high).contains(&rho_low) || rho_high <= 0.0 {
        return Err(invalid("rho_low", format!("need 0 <= {rho_low} <= {rho_high}, rho_high > 0")));
    }
    let b = ladder.boxes(k)?;
    let keeps = [1.0, rho_low / rho_high];
    let pairs: Vec<(BoxOutcome, BoxOutcome)> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let s = spread_family(law, rho_high, &keeps, Start::Main, b.duration, b.half_width, 1e-6, &source.replica(r))?;
            Ok((BoxOutcome::new(&b, &s[0]), BoxOutcome::new(&b, &s[1])))
        })
        .collect::<Result<_>>()?;
    let mut m = BoxMonotonicity { replicas, ..Default::default() };
    for (hi, lo) in &pairs {
        m.e_violations += (hi.e && !lo.e) as u64;
        m.d_violations += (lo.d && !hi.d) as u64;
        m.front_violations += (lo.front > hi.front) as u64;
    }
    Ok(m)
}

/// `P[A_{k,i}]` lower bound: some particle present at the start of the
/// subinterval makes its first jump to the right within it, and a particle
/// at the next site stays put throughout.
pub fn relay_probability(law: &JumpDistribution, rho: f64) -> f64 {
    let step: f64 = 1.0 / 8.0;
    let right = law.prob_pos()[0];
    let jumper = 1.0 - (-(1.0 - (-step).exp()) * right * rho).exp();
    let sitter = 1.0 - (-(-step).exp() * rho).exp();
    jumper * sitter
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriggerReport {
    pub scale: u64,
    pub rho: f64,
    /// `{r_L < 8L}`.
    pub slow: Frequency,
    /// `{r_L < L}`.
    pub very_slow: Frequency,
    /// Frequency of each relay event, indexed `8k + i`.
    pub relay_frequencies: Vec<f64>,
    /// All relay events held.
    pub all_relays: Frequency,
    /// Replicas where every relay held yet `r_L < 8L`.
    pub relay_violations: u64,
    /// `1 - sum_{k,i} P[A_{k,i}^c]` with the single-event lower bound, floored at 0.
    pub construction_lower_bound: f64,
}

struct TriggerRun {
    front: i64,
    relays: Vec<bool>,
}

fn trigger_run(law: &JumpDistribution, scale: u64, rho: f64, target: f64, source: &RandomSource) -> Result<TriggerRun> {
    let d = law.dim();
    let horizon = scale as f64;
    let reach = 8 * scale as i64 + 1;
    let mut core = reach.max((3.0 * horizon).ceil() as i64 + 1);
    loop {
        let slack = truncation_slack(rho, horizon, &SiteBox::centered(d, core), target)?;
        let window = SiteBox::centered(d, core + slack);
        let cost = rho * window.volume() as f64 * horizon;
        if cost > MAX_EXPECTED_JUMPS || window.volume() > MAX_WINDOW_SITES {
            return Err(Error::Capacity { what: "expected jumps", requested: cost as u64, limit: MAX_EXPECTED_JUMPS as u64 });
        }
        let o = Site::origin(d);
        let cfg = Configuration::poisson_keyed(rho, &window, window, &source.derive_label("init"))?
            .with_particle(ParticleId::extra_at(o), o)?;
        let mut st = InfectionState::seed(&cfg);
        let mut e = Engine::new(law, cfg, &source.derive_label("walks"))?;
        let mut relays = Vec::with_capacity(8 * scale as usize);
        let mut err = None;
        for k in 0..scale {
            for i in 0..8u64 {
                let t0 = k as f64 + i as f64 / 8.0;
                let t1 = k as f64 + (i + 1) as f64 / 8.0;
                let x = (8 * k + i) as i64;
                let here = Site::on_axis(d, x);
                let next = Site::on_axis(d, x + 1);
                let mut sitters: Vec<u32> = e.config().slots_at(&next).to_vec();
                let mut jumped = false;
                e.evolve(t1, |ev, c| {
                    if ev.from == next {
                        sitters.retain(|&s| s != ev.slot);
                    }
                    if ev.from == here && ev.to == next && ev.time >= t0 {
                        jumped = true;
                    }
                    if let Err(x) = st.propagate(ev, c) {
                        err.get_or_insert(x);
                    }
                });
                relays.push(jumped && !sitters.is_empty());
            }
        }
        if let Some(x) = err {
            return Err(x);
        }
        st.set_time(horizon);
        if st.infected_range() >= core {
            core = core.saturating_mul(2);
            continue;
        }
        return Ok(TriggerRun { front: st.front().expect("seed present"), relays });
    }
}

/// Frequency of `{r_L < 8L}` at density `rho` (the lemma uses `sqrt(L)`).
pub fn trigger_estimate_at(
    law: &JumpDistribution,
    scale: u64,
    rho: f64,
    replicas: u64,
    source: &RandomSource,
) -> Result<TriggerReport> {
    if scale < 1 {
        return Err(invalid("scale", "must be at least 1"));
    }
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(invalid("rho", format!("{rho} must be finite and nonnegative")));
    }
    let target = 1e-3 / replicas.max(1) as f64;
    let runs: Vec<TriggerRun> = (0..replicas)
        .into_par_iter()
        .map(|r| trigger_run(law, scale, rho, target, &source.replica(r)))
        .collect::<Result<_>>()?;
    let l = scale as i64;
    let slow = runs.iter().filter(|r| r.front < 8 * l).count() as u64;
    let very_slow = runs.iter().filter(|r| r.front < l).count() as u64;
    let n = (8 * scale) as usize;
    let mut freq = vec![0.0; n];
    for r in &runs {
        for (f, &a) in freq.iter_mut().zip(&r.relays) {
            *f += a as u64 as f64;
        }
    }
    for f in &mut freq {
        *f /= replicas.max(1) as f64;
    }
    let all = runs.iter().filter(|r| r.relays.iter().all(|&a| a)).count() as u64;
    let violations = runs.iter().filter(|r| r.relays.iter().all(|&a| a) && r.front < 8 * l).count() as u64;
    let bound = (1.0 - n as f64 * (1.0 - relay_probability(law, rho))).max(0.0);
    Ok(TriggerReport {
        scale,
        rho,
        slow: Frequency::new(slow, replicas),
        very_slow: Frequency::new(very_slow, replicas),
        relay_frequencies: freq,
        all_relays: Frequency::new(all, replicas),
        relay_violations: violations,
        construction_lower_bound: bound,
    })
}

pub fn trigger_estimate(law: &JumpDistribution, scale: u64, replicas: u64, source: &RandomSource) -> Result<TriggerReport> {
    trigger_estimate_at(law, scale, (scale as f64).sqrt(), replicas, source)
}

/// Trend over increasing scales: each frequency is at most the previous one
/// and the last is significantly below the first.
pub fn decreasing_trend(freqs: &[Frequency], alpha: f64) -> bool {
    match (freqs.first(), freqs.last()) {
        (Some(a), Some(b)) if freqs.len() >= 2 => {
            freqs.windows(2).all(|w| w[1].value <= w[0].value) && a.exceeds(b, alpha)
        }
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn law() -> JumpDistribution {
        JumpDistribution::one_dim(0.25).unwrap()
    }

    #[test]
    fn busy_site_at_zero_density() {
        let r = busy_site_estimate(&law(), 0.0, 4, 50, &RandomSource::new(1)).unwrap();
        assert_eq!(r.frequency.hits, 0);
        assert_eq!(r.max_occupancy_hist, vec![50]);
    }

    #[test]
    fn busy_site_threshold_unreached() {
        let r = busy_site_estimate(&law(), 2.0, 4, 300, &RandomSource::new(2)).unwrap();
        assert_eq!(r.threshold, 1024);
        assert_eq!(r.frequency.hits, 0);
        assert!(r.max_occupancy.iter().all(|&m| m < 30));
        assert!(busy_site_estimate(&law(), 17.0, 4, 1, &RandomSource::new(2)).is_err());
    }

    #[test]
    fn busy_site_monotone() {
        assert_eq!(busy_site_monotonicity(&law(), 1.0, 3.0, 4.0, 200, &RandomSource::new(3)).unwrap(), 0);
    }

    #[test]
    fn leave_box_small_case_and_nesting() {
        let f = leave_box_estimate(&law(), 4.0, 2, 7, 300, &RandomSource::new(4)).unwrap();
        assert_eq!(f.hits, 0);
        // nested events: a smaller box is left at least as often
        let small = leave_box_estimate(&law(), 4.0, 2, 1, 300, &RandomSource::new(4)).unwrap();
        let tiny = leave_box_estimate(&law(), 4.0, 2, 0, 300, &RandomSource::new(4)).unwrap();
        assert!(tiny.hits >= small.hits && small.hits >= f.hits);
        assert!(tiny.hits > 0);
    }

    #[test]
    fn zero_density_leave_box_is_single_walk_range() {
        // one walker, horizon 2, box half-width 1: leaves iff it makes two
        // consecutive jumps in one direction... estimate against simulation of the walk
        let f = leave_box_estimate(&law(), 0.0, 2, 0, 4000, &RandomSource::new(5)).unwrap();
        // P[max_{t<=2} |X_t| >= 2] by exact enumeration over jump counts
        let mut p = 0.0;
        let mut pois = (-2.0f64).exp();
        for n in 0..40u32 {
            if n > 0 {
                pois *= 2.0 / n as f64;
            }
            p += pois * walk_leaves(n, 0.25, 1);
        }
        let se = (p * (1.0 - p) / 4000.0).sqrt();
        assert!((f.value - p).abs() < 4.0 * se + 1e-9, "{} vs {p}", f.value);
    }

    /// P[the embedded walk of n steps leaves [-h, h]].
    fn walk_leaves(n: u32, right: f64, h: i64) -> f64 {
        let mut dist = std::collections::BTreeMap::from([(0i64, 1.0f64)]);
        let mut out = 0.0;
        for _ in 0..n {
            let mut next = std::collections::BTreeMap::new();
            for (&x, &q) in &dist {
                for (y, w) in [(x + 1, right), (x - 1, 1.0 - right)] {
                    if y.abs() > h {
                        out += q * w;
                    } else {
                        *next.entry(y).or_insert(0.0) += q * w;
                    }
                }
            }
            dist = next;
        }
        out
    }

    #[test]
    fn box_events_nest_and_are_monotone() {
        let ladder = ScaleLadder::new(4, 1, 0).unwrap();
        let p = estimate_ek(&law(), &ladder, 0, 200, &RandomSource::new(6)).unwrap();
        assert_eq!(p.nesting_violations, 0);
        assert!(p.p_relaxed.hits <= p.p_hat.hits);
        assert_eq!(p.fast_spread.hits, 0);
        let m = box_event_monotonicity(&law(), &ladder, 0, 1.0, 16.0, 100, &RandomSource::new(7)).unwrap();
        assert_eq!(m.e_violations + m.d_violations + m.front_violations, 0);
    }

    #[test]
    fn huge_density_makes_slow_event_rare() {
        let ladder = ScaleLadder::new(4, 1, 0).unwrap();
        let p = estimate_box_events(&law(), &ladder, 0, 0.0, 16.0, 40, &RandomSource::new(8)).unwrap();
        let base = estimate_ek(&law(), &ladder, 0, 40, &RandomSource::new(8)).unwrap();
        assert!(p.p_hat.value <= base.p_hat.value);
    }

    #[test]
    fn restart_from_a_later_anchor() {
        let ladder = ScaleLadder::new(2, 1, 0).unwrap();
        let p = estimate_box_events(&law(), &ladder, 0, 4.0, 2.0, 50, &RandomSource::new(9)).unwrap();
        assert_eq!(p.outcomes.len(), 50);
        assert!(p.outcomes.iter().all(|o| o.front == i64::MIN || o.range >= 0));
    }

    #[test]
    fn trigger_at_zero_density_is_always_slow() {
        let r = trigger_estimate_at(&law(), 2, 0.0, 200, &RandomSource::new(10)).unwrap();
        assert_eq!(r.slow.hits, 200);
        assert_eq!(r.all_relays.hits, 0);
    }

    #[test]
    fn trigger_small_case() {
        let r = trigger_estimate(&law(), 1, 400, &RandomSource::new(11)).unwrap();
        assert_eq!(r.relay_frequencies.len(), 8);
        assert_eq!(r.relay_violations, 0);
        // the construction bound is a lower bound on P[r_L >= 8L]
        assert!(1.0 - r.slow.ci.hi <= r.construction_lower_bound + 1e-12 || r.construction_lower_bound == 0.0);
        // single relay frequency dominates the single-event lower bound
        let q = relay_probability(&law(), 1.0);
        for &f in &r.relay_frequencies {
            assert!(f + 4.0 * (q * (1.0 - q) / 400.0).sqrt() >= q, "{f} < {q}");
        }
    }
}
