//! Choice of a finite window so that particles born outside it are unlikely
//! to reach a region of interest before the horizon.

use crate::error::{invalid, Error, Result};
use crate::lattice::SiteBox;
use crate::stats::poisson_upper_tail;

/// Largest slack ever returned.
pub const MAX_SLACK: i64 = 1_000_000;

fn shell_size(region: &SiteBox, j: i64) -> f64 {
    let outer: f64 = (0..region.dim()).map(|i| (region.side(i) + 2 * j) as f64).product();
    let inner: f64 = (0..region.dim()).map(|i| (region.side(i) + 2 * j - 2) as f64).product();
    outer - inner
}

/// Union bound for the shell at `l_inf` distance `j` from `region`: either the
/// shell holds at least `m` particles, or one of at most `m` particles makes
/// the `j` jumps needed to reach `region`.
fn shell_term(rho: f64, horizon: f64, region: &SiteBox, j: i64) -> f64 {
    let mean = rho * shell_size(region, j);
    let m = (2.0 * mean).ceil() + j as f64;
    let crowded = poisson_upper_tail(mean, m as u64);
    let runaway = m * poisson_upper_tail(horizon, j as u64);
    (crowded + runaway).min(1.0)
}

/// Smallest slack `s` such that the bound on
/// `P[a particle starting at distance > s from region enters region before horizon]`
/// is at most `target`.
pub fn truncation_slack(rho: f64, horizon: f64, region: &SiteBox, target: f64) -> Result<i64> {
    if !(rho >= 0.0) || !(horizon >= 0.0) {
        return Err(invalid("rho/horizon", format!("rho = {rho}, T = {horizon} must be nonnegative")));
    }
    if !(target > 0.0) {
        return Err(invalid("target_error", format!("{target} must be positive")));
    }
    if rho == 0.0 || horizon == 0.0 || target >= 1.0 {
        return Ok(0);
    }
    let floor = target * 1e-12;
    let reach = horizon + 12.0 * horizon.sqrt() + 10.0;
    let mut terms = Vec::new();
    let mut j = 1i64;
    loop {
        let t = shell_term(rho, horizon, region, j);
        terms.push(t);
        if (j as f64) > reach && t < floor {
            break;
        }
        j += 1;
        if j > MAX_SLACK {
            return Err(Error::TruncationUnreachable { target, max_radius: MAX_SLACK });
        }
    }
    // terms[j-1] belongs to shell j; the bound for slack s is the sum over shells j > s
    let mut tail = 0.0;
    let mut slack = terms.len() as i64;
    for (i, t) in terms.iter().enumerate().rev() {
        tail += t;
        if tail > target {
            break;
        }
        slack = i as i64;
    }
    Ok(slack)
}

/// Window half-width `R` for the region `B(0, n) = [-n, n]^d`.
pub fn truncation_radius(rho: f64, horizon: f64, n: i64, dim: usize, target: f64) -> Result<i64> {
    Ok(n + truncation_slack(rho, horizon, &SiteBox::centered(dim, n), target)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::RandomSource;
    use crate::lattice::JumpDistribution;
    use rand_distr::{Distribution, Poisson};

    #[test]
    fn zero_density_needs_no_slack() {
        assert_eq!(truncation_radius(0.0, 50.0, 50, 1, 1e-6).unwrap(), 50);
    }

    #[test]
    fn tighter_target_gives_larger_radius() {
        let a = truncation_radius(1.0, 50.0, 50, 1, 1e-6).unwrap();
        let b = truncation_radius(1.0, 50.0, 50, 1, 1e-9).unwrap();
        assert!(b >= a);
        assert!(a > 50 + 50, "{a}");
        let c = truncation_radius(1.0, 50.0, 50, 2, 1e-6).unwrap();
        assert!(c >= a);
    }

    #[test]
    fn shell_sizes() {
        let b = SiteBox::centered(2, 1);
        assert_eq!(shell_size(&b, 1), 25.0 - 9.0);
        assert_eq!(shell_size(&SiteBox::centered(1, 3), 4), 2.0);
    }

    // Monte Carlo: particles born just outside [-R, R] never reach [-n, n] before T.
    #[test]
    fn no_boundary_violations_in_ten_thousand_replicas() {
        let (rho, horizon, n) = (1.0, 50.0, 50i64);
        let r = truncation_radius(rho, horizon, n, 1, 1e-6).unwrap();
        let law = JumpDistribution::one_dim(0.25).unwrap();
        let jumps = Poisson::new(horizon).unwrap();
        let born = Poisson::new(rho).unwrap();
        let mut violations = 0;
        for rep in 0..10_000u64 {
            let mut rng = RandomSource::new(99).replica(rep).rng();
            for x in (r + 1..=r + 60).flat_map(|x| [x, -x]) {
                let count = born.sample(&mut rng) as u32;
                for _ in 0..count {
                    let k = jumps.sample(&mut rng) as u32;
                    let mut pos = x;
                    for _ in 0..k {
                        let dir = law.sample(&mut rng);
                        pos += if dir.positive { 1 } else { -1 };
                        if pos.abs() <= n {
                            violations += 1;
                            break;
                        }
                    }
                }
            }
        }
        assert_eq!(violations, 0, "R = {r}");
    }
}
