use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{truncation_slack, Configuration, Engine, RandomSource};
use crate::error::Result;
use crate::lattice::{JumpDistribution, Site, SiteBox};
use crate::stats::{chi_square_poisson, ChiSquareStat};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub rho: f64,
    pub time: f64,
    pub replicas: u64,
    pub slack: i64,
    /// Pooled histogram of interior site counts; the last cell is a tail.
    pub histogram: Vec<u64>,
    pub fit: ChiSquareStat,
    pub window_exits: u64,
}

impl InvariantReport {
    pub fn passes(&self, alpha: f64) -> bool {
        self.fit.p_value > alpha
    }
}

/// Evolve Poisson(`rho`) clouds for time `t` and fit the pooled interior
/// site counts to Poisson(`rho`).
pub fn invariant_measure_check(
    law: &JumpDistribution,
    rho: f64,
    interior: &SiteBox,
    t: f64,
    replicas: u64,
    source: &RandomSource,
    target_error: f64,
) -> Result<InvariantReport> {
    check_with_rates(law, rho, interior, t, replicas, source, target_error, None)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn check_with_rates(
    law: &JumpDistribution,
    rho: f64,
    interior: &SiteBox,
    t: f64,
    replicas: u64,
    source: &RandomSource,
    target_error: f64,
    site_rate: Option<fn(&Site) -> f64>,
) -> Result<InvariantReport> {
    let slack = truncation_slack(rho, t, interior, target_error)?;
    let window = interior.expand(slack);
    let cells = (3.0 * rho + 8.0 * rho.sqrt() + 3.0).ceil() as usize;
    let per_replica: Vec<Result<(Vec<u64>, u64)>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let src = source.replica(r);
            let init = Configuration::poisson(rho, &window, window, &src)?;
            let mut e = Engine::build(law, init, &src.derive_label("walks"), site_rate)?;
            e.evolve(t, |_, _| {});
            let mut hist = vec![0u64; cells];
            for s in interior.sites() {
                hist[e.config().count(&s).min(cells - 1)] += 1;
            }
            Ok((hist, e.exits()))
        })
        .collect();
    let mut histogram = vec![0u64; cells];
    let mut window_exits = 0;
    for r in per_replica {
        let (h, x) = r?;
        for (a, b) in histogram.iter_mut().zip(h) {
            *a += b;
        }
        window_exits += x;
    }
    let total = histogram.iter().sum();
    let fit = chi_square_poisson(&histogram, rho, total);
    Ok(InvariantReport { rho, time: t, replicas, slack, histogram, fit, window_exits })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn law() -> JumpDistribution {
        JumpDistribution::one_dim(0.25).unwrap()
    }

    #[test]
    fn time_zero_fits() {
        let r = invariant_measure_check(&law(), 1.0, &SiteBox::cube(1, 1, 100), 0.0, 200, &RandomSource::new(1), 1e-6)
            .unwrap();
        assert!(r.passes(0.01), "{r:?}");
        assert_eq!(r.slack, 0);
    }

    #[test]
    fn evolved_cloud_stays_poisson() {
        let r = invariant_measure_check(&law(), 1.0, &SiteBox::cube(1, 1, 100), 20.0, 1000, &RandomSource::new(2), 1e-6)
            .unwrap();
        assert!(r.passes(0.01), "{r:?}");
    }

    fn alternating(s: &Site) -> f64 {
        if s.first().rem_euclid(2) == 0 {
            2.0
        } else {
            1.0
        }
    }

    // Site-dependent holding rates change the invariant law; the check must notice.
    #[test]
    fn broken_rates_are_detected() {
        let r = check_with_rates(
            &law(),
            1.0,
            &SiteBox::cube(1, 1, 100),
            20.0,
            1000,
            &RandomSource::new(2),
            1e-6,
            Some(alternating),
        )
        .unwrap();
        assert!(!r.passes(0.01), "{r:?}");
    }
}
