//! Simulation cross-checks of the exact kernel and meeting oracles.

use serde::{Deserialize, Serialize};

use super::kernel::{exact_kernel, meeting_probability};
use crate::engine::{IncrementSampler, RandomSource};
use crate::error::{invalid, Result};
use crate::lattice::JumpDistribution;

/// An exact probability next to a simulated frequency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McPoint {
    pub label: String,
    pub exact: f64,
    pub hits: u64,
    pub samples: u64,
    pub frequency: f64,
    /// Binomial standard error at the exact value.
    pub sigma: f64,
    pub z: f64,
}

impl McPoint {
    fn new(label: String, exact: f64, hits: u64, samples: u64) -> Self {
        let frequency = hits as f64 / samples.max(1) as f64;
        let sigma = (exact * (1.0 - exact) / samples.max(1) as f64).sqrt();
        let z = if sigma > 0.0 { (frequency - exact) / sigma } else if frequency == exact { 0.0 } else { f64::INFINITY };
        McPoint { label, exact, hits, samples, frequency, sigma, z }
    }

    pub fn agrees(&self, k_sigma: f64) -> bool {
        self.z.abs() <= k_sigma
    }
}

/// `P_0[X_t = x]` from the table against `samples` simulated endpoints.
pub fn kernel_mc(law: &JumpDistribution, t: f64, points: &[Vec<i64>], samples: u64, source: &RandomSource) -> Result<Vec<McPoint>> {
    let d = law.dim();
    if points.iter().any(|x| x.len() != d) {
        return Err(invalid("points", format!("need {d} coordinates")));
    }
    let table = exact_kernel(law, t)?;
    let sampler = IncrementSampler::new(law, t)?;
    let mut rng = source.rng();
    let mut hits = vec![0u64; points.len()];
    for _ in 0..samples {
        let x = sampler.sample(&mut rng);
        for (h, p) in hits.iter_mut().zip(points) {
            if x.coords() == p.as_slice() {
                *h += 1;
            }
        }
    }
    Ok(points.iter().zip(hits).map(|(x, h)| McPoint::new(format!("{x:?}"), table.get(x), h, samples)).collect())
}

/// The meeting probability by convolution, checked against two simulations:
/// both walks run separately, and their difference run as one walk of the
/// symmetrized law at twice the rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeetingCheck {
    pub x: Vec<i64>,
    pub y: Vec<i64>,
    pub t: f64,
    pub exact: f64,
    pub pair: McPoint,
    pub difference: McPoint,
}

pub fn meeting_mc(
    law: &JumpDistribution,
    x: &[i64],
    y: &[i64],
    t: f64,
    samples: u64,
    source: &RandomSource,
) -> Result<MeetingCheck> {
    let exact = meeting_probability(law, x, y, t)?;
    let walk = IncrementSampler::new(law, t)?;
    let mut rng = source.derive_label("pair").rng();
    let mut pair = 0u64;
    for _ in 0..samples {
        let a = walk.sample(&mut rng);
        let b = walk.sample(&mut rng);
        pair += (0..law.dim()).all(|i| x[i] + a.coords()[i] == y[i] + b.coords()[i]) as u64;
    }
    let sym: Vec<f64> = (0..law.dim()).map(|i| 0.5 * (law.prob_pos()[i] + law.prob_neg()[i])).collect();
    let diff_law = JumpDistribution::new(sym.clone(), sym)?;
    let diff = IncrementSampler::new(&diff_law, 2.0 * t)?;
    let mut rng = source.derive_label("difference").rng();
    let mut difference = 0u64;
    for _ in 0..samples {
        let z = diff.sample(&mut rng);
        difference += (0..law.dim()).all(|i| x[i] - y[i] + z.coords()[i] == 0) as u64;
    }
    Ok(MeetingCheck {
        x: x.to_vec(),
        y: y.to_vec(),
        t,
        exact,
        pair: McPoint::new("pair".into(), exact, pair, samples),
        difference: McPoint::new("difference".into(), exact, difference, samples),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_points_agree() {
        let law = JumpDistribution::one_dim(0.25).unwrap();
        let pts: Vec<Vec<i64>> = [-40, -32, -24].iter().map(|&x| vec![x]).collect();
        let r = kernel_mc(&law, 64.0, &pts, 100_000, &RandomSource::new(8)).unwrap();
        assert!(r.iter().all(|p| p.agrees(4.0)), "{r:?}");
        assert!(r[1].exact > 0.02);
    }

    #[test]
    fn meeting_routes_agree() {
        let law = JumpDistribution::one_dim(0.25).unwrap();
        let m = meeting_mc(&law, &[2], &[0], 16.0, 100_000, &RandomSource::new(9)).unwrap();
        assert!(m.pair.agrees(4.0) && m.difference.agrees(4.0), "{m:?}");
        assert!(m.exact > 0.03);
    }

    #[test]
    fn exact_zero_needs_zero_hits() {
        let p = McPoint::new("x".into(), 0.0, 0, 10);
        assert!(p.agrees(4.0));
        assert!(!McPoint::new("x".into(), 0.0, 1, 10).agrees(4.0));
    }
}
