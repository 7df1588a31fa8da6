//! Linear deviations of a single walk from its mean path, and the random
//! radius after which the walk stays in a linearly growing envelope.

use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ci::{wilson_ci, Interval};
use crate::engine::RandomSource;
use crate::error::{invalid, Result};
use crate::lattice::{JumpDistribution, MAX_DIM};

/// `max_i |x_i - t v_i|`.
fn deviation(x: &[i64], v: &[f64], t: f64) -> f64 {
    x.iter().zip(v).map(|(&c, &vi)| (c as f64 - vi * t).abs()).fold(0.0, f64::max)
}

/// Walk the law up to `horizon`, calling `piece(x, a, b)` for every interval
/// `[a, b)` on which the position is `x`.
fn pieces<F: FnMut(&[i64], f64, f64) -> bool>(law: &JumpDistribution, horizon: f64, source: &RandomSource, mut piece: F) {
    let d = law.dim();
    let mut rng = source.rng();
    let mut x = [0i64; MAX_DIM];
    let mut t = 0.0;
    loop {
        let w: f64 = Exp1.sample(&mut rng);
        let next = (t + w).min(horizon);
        if !piece(&x[..d], t, next) || next >= horizon {
            return;
        }
        let dir = law.sample(&mut rng);
        x[dir.axis as usize] += if dir.positive { 1 } else { -1 };
        t = next;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationPoint {
    pub u: f64,
    pub hits: u64,
    pub replicas: u64,
    pub frequency: f64,
    pub ci: Interval,
}

/// Frequency of `{||X_t - vt||_inf >= eps u for some t <= u}`.
pub fn deviation_tail(law: &JumpDistribution, eps: f64, u: f64, replicas: u64, source: &RandomSource) -> Result<DeviationPoint> {
    if !(eps > 0.0 && u > 0.0) {
        return Err(invalid("eps/u", format!("eps = {eps}, u = {u} must be positive")));
    }
    let v = law.drift();
    let level = eps * u;
    let hits: u64 = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut hit = false;
            // the deviation is convex on each piece, so its sup sits at an end
            pieces(law, u, &source.replica(r), |x, a, b| {
                hit = deviation(x, v.components(), a) >= level || deviation(x, v.components(), b) >= level;
                !hit
            });
            hit as u64
        })
        .sum();
    Ok(DeviationPoint {
        u,
        hits,
        replicas,
        frequency: hits as f64 / replicas.max(1) as f64,
        ci: wilson_ci(hits, replicas, 0.95),
    })
}

/// Least-squares line `y = a + b x`, with `R^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
    pub points: usize,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    LinearFit { intercept: my - slope * mx, slope, r_squared, points: xs.len() }
}

/// Fit of `log frequency` against `u` over the points with positive frequency.
pub fn log_slope(points: &[DeviationPoint]) -> Option<LinearFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().filter(|p| p.hits > 0).map(|p| (p.u, p.frequency.ln())).unzip();
    (xs.len() >= 2).then(|| linear_fit(&xs, &ys))
}

/// One trajectory's envelope radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MushroomSample {
    /// Last time in the horizon with `||X_t - tv|| > eps t`.
    pub settle_time: f64,
    /// `sup_{t <= settle_time} ||X_t - tv||`.
    pub pre_deviation: f64,
    /// `max(settle_time, pre_deviation)`.
    pub radius: f64,
    /// Settled only in the second half of the horizon.
    pub unsettled: bool,
    /// `||X_t - tv|| <= max(radius, eps t)` held at every piece end.
    pub envelope_ok: bool,
}

fn mushroom_sample(law: &JumpDistribution, eps: f64, horizon: f64, source: &RandomSource) -> MushroomSample {
    let v = law.drift();
    let v = v.components();
    let excess = |x: &[i64], t: f64| deviation(x, v, t) - eps * t;
    let mut settle = 0.0f64;
    let mut record: Vec<(f64, f64)> = Vec::new();
    pieces(law, horizon, source, |x, a, b| {
        let (ga, gb) = (excess(x, a), excess(x, b));
        if gb > 0.0 {
            settle = b;
        } else if ga > 0.0 {
            // convex in t: bisect for the crossing
            let (mut lo, mut hi) = (a, b);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if excess(x, mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            settle = lo;
        }
        record.push((a, deviation(x, v, a)));
        record.push((b, deviation(x, v, b)));
        true
    });
    // largest deviation up to the settle time; the last piece is cut at settle
    let mut pre: f64 = 0.0;
    for w in record.chunks(2) {
        let (a, da) = w[0];
        let (b, db) = w[1];
        if a > settle {
            break;
        }
        pre = pre.max(da);
        if b <= settle {
            pre = pre.max(db);
        } else {
            let slope = (db - da) / (b - a).max(f64::MIN_POSITIVE);
            pre = pre.max(da + slope * (settle - a));
        }
    }
    let radius = settle.max(pre);
    let envelope_ok = record.iter().all(|&(t, dev)| dev <= radius.max(eps * t) + 1e-9);
    MushroomSample { settle_time: settle, pre_deviation: pre, radius, unsettled: settle > horizon / 2.0, envelope_ok }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MushroomReport {
    pub eps: f64,
    pub horizon: f64,
    pub samples: Vec<MushroomSample>,
    pub unsettled: u64,
    pub envelope_failures: u64,
    /// `(u, P[R >= u])` on the grid.
    pub tail: Vec<(f64, f64)>,
    /// Fit of `log P[R >= u]` against `u` where the tail is positive.
    pub fit: Option<LinearFit>,
}

/// Empirical tail of the envelope radius over `replicas` trajectories.
pub fn mushroom_tail(
    law: &JumpDistribution,
    eps: f64,
    replicas: u64,
    horizon: f64,
    source: &RandomSource,
) -> Result<MushroomReport> {
    if !(eps > 0.0 && horizon > 0.0) {
        return Err(invalid("eps/horizon", format!("eps = {eps}, horizon = {horizon} must be positive")));
    }
    let samples: Vec<MushroomSample> =
        (0..replicas).into_par_iter().map(|r| mushroom_sample(law, eps, horizon, &source.replica(r))).collect();
    let n = samples.len().max(1) as f64;
    let mut radii: Vec<f64> = samples.iter().map(|s| s.radius).collect();
    radii.sort_by(f64::total_cmp);
    let top = radii.last().copied().unwrap_or(0.0);
    let grid = 20;
    let tail: Vec<(f64, f64)> = (0..grid)
        .map(|i| {
            let u = top * i as f64 / grid as f64;
            let above = radii.len() - radii.partition_point(|&r| r < u);
            (u, above as f64 / n)
        })
        .collect();
    // fit only where at least 10 trajectories remain above u
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        tail.iter().filter(|&&(_, p)| p * n >= 10.0).map(|&(u, p)| (u, p.ln())).unzip();
    let fit = (xs.len() >= 3).then(|| linear_fit(&xs, &ys));
    Ok(MushroomReport {
        eps,
        horizon,
        unsettled: samples.iter().filter(|s| s.unsettled).count() as u64,
        envelope_failures: samples.iter().filter(|s| !s.envelope_ok).count() as u64,
        samples,
        tail,
        fit,
    })
}

/// Sample moments of `X_t / t` along `e_1` and of the jump count at time `t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkMoments {
    pub t: f64,
    pub replicas: u64,
    pub speed_mean: f64,
    /// Standard error of `speed_mean` from the exact variance `E[xi_1^2] / t`.
    pub speed_sigma: f64,
    pub jumps_mean: f64,
    pub jumps_var: f64,
    /// Standard errors of the jump-count mean and variance under Poisson(`t`).
    pub jumps_mean_sigma: f64,
    pub jumps_var_sigma: f64,
}

impl WalkMoments {
    /// `(speed, jump mean, jump variance)` in units of their standard errors.
    pub fn z_scores(&self, drift: f64) -> [f64; 3] {
        [
            (self.speed_mean - drift) / self.speed_sigma,
            (self.jumps_mean - self.t) / self.jumps_mean_sigma,
            (self.jumps_var - self.t) / self.jumps_var_sigma,
        ]
    }
}

pub fn walk_moments(law: &JumpDistribution, t: f64, replicas: u64, source: &RandomSource) -> Result<WalkMoments> {
    if !(t > 0.0 && t.is_finite()) || replicas < 2 {
        return Err(invalid("t/replicas", format!("t = {t} must be positive, replicas = {replicas} at least 2")));
    }
    let samples: Vec<(i64, u64)> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let (mut x, mut jumps) = (0i64, 0u64);
            pieces(law, t, &source.replica(r), |pos, _, b| {
                x = pos[0];
                if b < t {
                    jumps += 1;
                }
                true
            });
            (x, jumps)
        })
        .collect();
    let n = replicas as f64;
    let speed_mean = samples.iter().map(|s| s.0 as f64).sum::<f64>() / n / t;
    let jumps_mean = samples.iter().map(|s| s.1 as f64).sum::<f64>() / n;
    let jumps_var = samples.iter().map(|s| (s.1 as f64 - jumps_mean).powi(2)).sum::<f64>() / (n - 1.0);
    let step2 = law.prob_pos()[0] + law.prob_neg()[0];
    // Var(X_t) = t E[xi^2]; Var(S^2) ~ (mu_4 - sigma^4) / n = (t + 2t^2) / n for Poisson(t)
    Ok(WalkMoments {
        t,
        replicas,
        speed_mean,
        speed_sigma: (t * step2).sqrt() / t / n.sqrt(),
        jumps_mean,
        jumps_var,
        jumps_mean_sigma: (t / n).sqrt(),
        jumps_var_sigma: ((t + 2.0 * t * t) / n).sqrt(),
    })
}

/// `P[max_{t <= u} |X_t| >= level]` for the symmetric one-dimensional walk, by
/// conditioning on the number of jumps and absorbing the embedded chain.
pub fn symmetric_exit_probability(u: f64, level: i64) -> f64 {
    let h = level.max(1);
    let width = (2 * h - 1) as usize;
    let mut dist = vec![0.0f64; width];
    dist[(h - 1) as usize] = 1.0;
    let mut absorbed = 0.0;
    let mut total = 0.0;
    let k_max = super::kernel::jump_cutoff(u);
    for k in 0..=k_max {
        total += super::poisson::poisson_pmf(u, k) * absorbed;
        let mut next = vec![0.0; width];
        for (i, &p) in dist.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for j in [i as i64 - 1, i as i64 + 1] {
                if j < 0 || j >= width as i64 {
                    absorbed += 0.5 * p;
                } else {
                    next[j as usize] += 0.5 * p;
                }
            }
        }
        dist = next;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn biased() -> JumpDistribution {
        JumpDistribution::one_dim(0.25).unwrap()
    }

    #[test]
    fn huge_eps_never_deviates() {
        let p = deviation_tail(&biased(), 10.0, 50.0, 2000, &RandomSource::new(1)).unwrap();
        assert_eq!(p.hits, 0);
    }

    #[test]
    fn frequencies_decrease_in_u() {
        let pts: Vec<_> = [20.0, 40.0, 80.0]
            .iter()
            .map(|&u| deviation_tail(&biased(), 0.3, u, 20_000, &RandomSource::new(2)).unwrap())
            .collect();
        assert!(pts.windows(2).all(|w| w[1].frequency < w[0].frequency), "{pts:?}");
        assert!(log_slope(&pts).unwrap().slope < 0.0);
    }

    #[test]
    fn symmetric_walk_matches_exact_chain() {
        let law = JumpDistribution::symmetric(1).unwrap();
        let n = 20_000;
        let p = deviation_tail(&law, 0.3, 40.0, n, &RandomSource::new(3)).unwrap();
        let exact = symmetric_exit_probability(40.0, 12);
        let se = (exact * (1.0 - exact) / n as f64).sqrt();
        assert!((p.frequency - exact).abs() < 4.0 * se, "{} vs {exact}", p.frequency);
    }

    #[test]
    fn exit_oracle_small_case() {
        // level 1 is reached at the first jump
        let u: f64 = 2.0;
        assert!((symmetric_exit_probability(u, 1) - (1.0 - (-u).exp())).abs() < 1e-12);
    }

    #[test]
    fn mushroom_envelope_and_tail() {
        let r = mushroom_tail(&biased(), 0.25, 3000, 2000.0, &RandomSource::new(4)).unwrap();
        assert_eq!(r.envelope_failures, 0);
        assert!(r.samples.iter().all(|s| s.radius >= s.settle_time && s.radius >= s.pre_deviation));
        let fit = r.fit.unwrap();
        assert!(fit.slope < 0.0 && fit.r_squared > 0.9, "{fit:?}");
    }

    #[test]
    fn moments_match_poisson_clock() {
        let m = walk_moments(&biased(), 100.0, 4000, &RandomSource::new(6)).unwrap();
        assert!(m.z_scores(-0.5).iter().all(|z| z.abs() < 4.0), "{m:?}");
    }

    #[test]
    fn large_eps_settles_early() {
        let r = mushroom_tail(&biased(), 2.0, 2000, 200.0, &RandomSource::new(5)).unwrap();
        assert_eq!(r.unsettled, 0);
        let mean = r.samples.iter().map(|s| s.radius).sum::<f64>() / 2000.0;
        assert!(mean < 4.0, "{mean}");
    }
}
