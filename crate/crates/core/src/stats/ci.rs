use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

/// Two-sided standard normal quantile for confidence `level`.
pub fn z_for_level(level: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(0.5 + level / 2.0)
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_ci(successes: u64, trials: u64, level: f64) -> Interval {
    assert!(successes <= trials, "{successes} successes out of {trials} trials");
    if trials == 0 {
        return Interval { lo: 0.0, hi: 1.0 };
    }
    let z = z_for_level(level);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    Interval { lo: (center - half).max(0.0), hi: (center + half).min(1.0) }
}

/// One-sided test that proportion `a` exceeds proportion `b`: pooled z statistic.
pub fn two_proportion_z(succ_a: u64, n_a: u64, succ_b: u64, n_b: u64) -> f64 {
    let (na, nb) = (n_a as f64, n_b as f64);
    let (pa, pb) = (succ_a as f64 / na, succ_b as f64 / nb);
    let pool = (succ_a + succ_b) as f64 / (na + nb);
    let se = (pool * (1.0 - pool) * (1.0 / na + 1.0 / nb)).sqrt();
    if se == 0.0 {
        return 0.0;
    }
    (pa - pb) / se
}

/// Pearson goodness-of-fit result.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareStat {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson test of `observed` against cell probabilities `probs` (same length,
/// summing to one). Adjacent cells are merged from the right until each has
/// expected count at least 5.
pub fn chi_square(observed: &[u64], probs: &[f64]) -> ChiSquareStat {
    assert_eq!(observed.len(), probs.len());
    let total: u64 = observed.iter().sum();
    let n = total as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (&obs, &p) in observed.iter().zip(probs) {
        o += obs as f64;
        e += p * n;
        if e >= 5.0 {
            cells.push((o, e));
            o = 0.0;
            e = 0.0;
        }
    }
    if e > 0.0 || o > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += o;
                last.1 += e;
            }
            None => cells.push((o, e)),
        }
    }
    let statistic: f64 = cells.iter().map(|(o, e)| if *e > 0.0 { (o - e).powi(2) / e } else { 0.0 }).sum();
    let dof = cells.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        1.0 - ChiSquared::new(dof as f64).expect("positive dof").cdf(statistic)
    };
    ChiSquareStat { statistic, dof, p_value }
}

/// Fit of a count histogram to Poisson(`rho`). The last cell of `hist` holds all
/// counts `>= hist.len() - 1`; `total` must equal the histogram sum.
pub fn chi_square_poisson(hist: &[u64], rho: f64, total: u64) -> ChiSquareStat {
    debug_assert_eq!(hist.iter().sum::<u64>(), total);
    let k = hist.len();
    let mut probs: Vec<f64> = (0..k as u64 - 1).map(|j| super::poisson_pmf(rho, j)).collect();
    probs.push(super::poisson_upper_tail(rho, k as u64 - 1));
    chi_square(hist, &probs)
}

/// Pearson correlation of paired samples; zero when either side is constant.
pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_anchors() {
        let i = wilson_ci(0, 100, 0.95);
        assert_eq!(i.lo, 0.0);
        assert!((i.hi - 0.0370).abs() < 5e-5, "{}", i.hi);
        let i = wilson_ci(50, 100, 0.95);
        assert!((i.lo + i.hi - 1.0).abs() < 1e-12);
        assert_eq!(wilson_ci(0, 0, 0.95), Interval { lo: 0.0, hi: 1.0 });
    }

    #[test]
    fn wilson_widens_with_level() {
        let a = wilson_ci(13, 80, 0.9);
        let b = wilson_ci(13, 80, 0.99);
        assert!(b.lo < a.lo && b.hi > a.hi);
    }

    #[test]
    fn chi_square_perfect_fit() {
        let r = chi_square(&[50, 50], &[0.5, 0.5]);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.dof, 1);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chi_square_merges_sparse_cells() {
        let r = chi_square(&[90, 8, 1, 1], &[0.9, 0.08, 0.015, 0.005]);
        assert_eq!(r.dof, 1);
    }
}
