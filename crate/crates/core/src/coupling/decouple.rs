//! Monte Carlo check of the decoupling inequality for decreasing functions of
//! two time-separated space-time boxes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{truncation_slack, Configuration, IncrementSampler, RandomSource};
use crate::error::{invalid, Result};
use crate::lattice::{JumpDistribution, SiteBox};
use crate::stats::{correlation, z_for_level};

/// `min(1/2, d / (2 sqrt(d + 2)))`.
pub fn decoupling_exponent(dim: usize) -> f64 {
    (0.5f64).min(dim as f64 / (2.0 * ((dim + 2) as f64).sqrt()))
}

/// `rho (1 + gap^{-d / (4 sqrt(d + 2))})`.
pub fn sprinkle_density(rho: f64, gap: f64, dim: usize) -> f64 {
    super::sprinkle::sprinkled_density(rho, gap, dim)
}

/// Decreasing indicator functions of the occupation of a box on its time grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Probe {
    One,
    /// At most `m` particles in the box at its final time.
    AtMost { m: u64 },
    /// No particle in the box at any grid time.
    EmptyThroughout,
}

impl Probe {
    /// `counts[k]` is the number of particles in the box at the `k`-th grid time.
    pub fn eval(&self, counts: &[u64]) -> f64 {
        let ok = match self {
            Probe::One => true,
            Probe::AtMost { m } => counts.last().is_none_or(|c| c <= m),
            Probe::EmptyThroughout => counts.iter().all(|&c| c == 0),
        };
        if ok {
            1.0
        } else {
            0.0
        }
    }
}

/// Two boxes `[1, n]^d x [0, n]` and `[1, n]^d x [n + gap, 2n + gap]` with one probe each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecouplingProbe {
    pub dim: usize,
    pub side: i64,
    pub gap: f64,
    pub first: Probe,
    pub second: Probe,
}

impl DecouplingProbe {
    pub fn new(dim: usize, side: i64, gap: f64, first: Probe, second: Probe) -> Result<Self> {
        if side < 1 {
            return Err(invalid("side", format!("{side} must be at least 1")));
        }
        if !(gap >= 1.0 && gap.is_finite()) {
            return Err(invalid("gap", format!("{gap} must be at least 1")));
        }
        Ok(DecouplingProbe { dim, side, gap, first, second })
    }

    pub fn sites(&self) -> SiteBox {
        SiteBox::cube(self.dim, 1, self.side)
    }

    /// `rho^{2d+2} (n + gap)^{d+1} exp(-c gap^delta)`.
    pub fn error_term(&self, rho: f64, c: f64) -> f64 {
        let d = self.dim as i32;
        rho.powi(2 * d + 2) * (self.side as f64 + self.gap).powi(d + 1) * (-c * self.gap.powf(decoupling_exponent(self.dim))).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_err: f64,
}

impl MeanEstimate {
    fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        MeanEstimate { mean, std_err: (var / n).sqrt() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecouplingReport {
    pub probe: DecouplingProbe,
    pub rho: f64,
    pub rho_star: f64,
    pub replicas: u64,
    /// `E_{rho*}[f1 f2]`.
    pub joint: MeanEstimate,
    /// `E_{rho*}[f1]` from an independent sample.
    pub first: MeanEstimate,
    /// `E_{rho}[f2]` from an independent sample.
    pub second: MeanEstimate,
    pub error_constant: f64,
    pub error_term: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`.
    pub margin: f64,
    pub sigma: f64,
    pub holds: bool,
    pub holds_without_error: bool,
    /// Correlation of `f1` and `f2` within the joint sample.
    pub correlation: f64,
}

/// Counts in `region` at the grid times of both boxes, or of the first box only.
fn box_counts(
    law: &JumpDistribution,
    probe: &DecouplingProbe,
    cfg: &Configuration,
    both: bool,
    source: &RandomSource,
) -> Result<(Vec<u64>, Vec<u64>)> {
    let region = probe.sites();
    let n = probe.side as usize;
    let unit = IncrementSampler::new(law, 1.0)?;
    let jump = IncrementSampler::new(law, probe.gap)?;
    let mut rng = source.rng();
    let mut first = vec![0u64; n + 1];
    let mut second = vec![0u64; if both { n + 1 } else { 0 }];
    for &start in cfg.positions() {
        let mut x = start;
        for k in 0..=n {
            if k > 0 {
                x = x.offset(&unit.sample(&mut rng));
            }
            first[k] += region.contains(&x) as u64;
        }
        if both {
            x = x.offset(&jump.sample(&mut rng));
            for k in 0..=n {
                if k > 0 {
                    x = x.offset(&unit.sample(&mut rng));
                }
                second[k] += region.contains(&x) as u64;
            }
        }
    }
    Ok((first, second))
}

fn cloud(rho: f64, horizon: f64, region: &SiteBox, target: f64, source: &RandomSource) -> Result<Configuration> {
    let slack = truncation_slack(rho, horizon, region, target)?;
    let w = region.expand(slack);
    Configuration::poisson(rho, &w, w, source)
}

/// Three independent estimates: the joint expectation and the first
/// expectation at the sprinkled density, the second at the base density.
/// Passes when `lhs - rhs <= z sigma` at one-sided level `level`.
pub fn decoupling_probe(
    law: &JumpDistribution,
    probe: &DecouplingProbe,
    rho: f64,
    replicas: u64,
    error_constant: f64,
    level: f64,
    source: &RandomSource,
) -> Result<DecouplingReport> {
    if law.dim() != probe.dim {
        return Err(invalid("law", "dimension differs from the probe"));
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(invalid("rho", format!("{rho} must be positive")));
    }
    if replicas < 2 {
        return Err(invalid("replicas", "need at least 2"));
    }
    let rho_star = sprinkle_density(rho, probe.gap, probe.dim);
    let region = probe.sites();
    let n = probe.side as f64;
    let target = 1e-3 / replicas as f64;
    let joint_src = source.derive_label("joint");
    let first_src = source.derive_label("first");
    let second_src = source.derive_label("second");
    let samples: Vec<(f64, f64, f64, f64)> = (0..replicas)
        .into_par_iter()
        .map(|r| -> Result<_> {
            let s = joint_src.replica(r);
            let c = cloud(rho_star, 2.0 * n + probe.gap, &region, target, &s.derive_label("init"))?;
            let (a, b) = box_counts(law, probe, &c, true, &s.derive_label("walks"))?;
            let (f1, f2) = (probe.first.eval(&a), probe.second.eval(&b));
            let s = first_src.replica(r);
            let c = cloud(rho_star, n, &region, target, &s.derive_label("init"))?;
            let (a, _) = box_counts(law, probe, &c, false, &s.derive_label("walks"))?;
            let g1 = probe.first.eval(&a);
            let s = second_src.replica(r);
            let c = cloud(rho, n, &region, target, &s.derive_label("init"))?;
            let (b, _) = box_counts(law, probe, &c, false, &s.derive_label("walks"))?;
            let g2 = probe.second.eval(&b);
            Ok((f1, f2, g1, g2))
        })
        .collect::<Result<_>>()?;
    let f1: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let f2: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let prod: Vec<f64> = samples.iter().map(|s| s.0 * s.1).collect();
    let g1: Vec<f64> = samples.iter().map(|s| s.2).collect();
    let g2: Vec<f64> = samples.iter().map(|s| s.3).collect();
    let joint = MeanEstimate::of(&prod);
    let first = MeanEstimate::of(&g1);
    let second = MeanEstimate::of(&g2);
    let error_term = probe.error_term(rho, error_constant);
    let lhs = joint.mean;
    let product = first.mean * second.mean;
    let rhs = product + error_term;
    let sigma = (joint.std_err.powi(2)
        + (second.mean * first.std_err).powi(2)
        + (first.mean * second.std_err).powi(2))
    .sqrt();
    let z = z_for_level(2.0 * level - 1.0);
    Ok(DecouplingReport {
        probe: probe.clone(),
        rho,
        rho_star,
        replicas,
        joint,
        first,
        second,
        error_constant,
        error_term,
        lhs,
        rhs,
        margin: rhs - lhs,
        sigma,
        holds: lhs - rhs <= z * sigma,
        holds_without_error: lhs - product <= z * sigma,
        correlation: correlation(&f1, &f2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn law() -> JumpDistribution {
        JumpDistribution::one_dim(0.25).unwrap()
    }

    #[test]
    fn exponent_and_density() {
        assert_eq!(decoupling_exponent(2), 0.5);
        assert!((decoupling_exponent(1) - 1.0 / (2.0 * 3f64.sqrt())).abs() < 1e-15);
        assert_eq!(sprinkle_density(1.5, 1.0, 1), 3.0);
        assert!((sprinkle_density(1.0, 1e300, 1) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn error_term_formula() {
        let p = DecouplingProbe::new(1, 4, 100.0, Probe::One, Probe::One).unwrap();
        let want = 104f64.powi(2) * (-(100f64.powf(1.0 / (2.0 * 3f64.sqrt())))).exp();
        assert!((p.error_term(1.0, 1.0) - want).abs() < 1e-12 * want);
    }

    #[test]
    fn probe_values() {
        assert_eq!(Probe::EmptyThroughout.eval(&[0, 0, 1]), 0.0);
        assert_eq!(Probe::EmptyThroughout.eval(&[0, 0]), 1.0);
        assert_eq!(Probe::AtMost { m: 1 }.eval(&[5, 1]), 1.0);
        assert_eq!(Probe::AtMost { m: 1 }.eval(&[0, 2]), 0.0);
        assert_eq!(Probe::One.eval(&[9]), 1.0);
    }

    #[test]
    fn constant_second_probe_reduces_to_first_mean() {
        let p = DecouplingProbe::new(1, 4, 20.0, Probe::AtMost { m: 2 }, Probe::One).unwrap();
        let r = decoupling_probe(&law(), &p, 1.0, 2000, 1.0, 0.95, &RandomSource::new(8)).unwrap();
        assert_eq!(r.second.mean, 1.0);
        assert!(r.holds_without_error);
        // two independent estimates of the same mean
        let z = (r.joint.mean - r.first.mean) / (r.joint.std_err.powi(2) + r.first.std_err.powi(2)).sqrt();
        assert!(z.abs() < 4.0, "{z}");
    }

    #[test]
    fn empty_box_probability_matches_poisson() {
        // at a single time the box count is Poisson(rho n)
        let p = DecouplingProbe::new(1, 3, 5.0, Probe::AtMost { m: 0 }, Probe::AtMost { m: 0 }).unwrap();
        let r = decoupling_probe(&law(), &p, 0.5, 4000, 1.0, 0.95, &RandomSource::new(9)).unwrap();
        let want = (-0.5f64 * 3.0).exp();
        assert!((r.first.mean - (-r.rho_star * 3.0).exp()).abs() < 4.0 * r.first.std_err);
        assert!((r.second.mean - want).abs() < 4.0 * r.second.std_err, "{} {}", r.second.mean, want);
    }
}
