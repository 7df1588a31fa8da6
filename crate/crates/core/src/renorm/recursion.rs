use serde::{Deserialize, Serialize};

use super::ladder::ScaleLadder;
use crate::coupling::decoupling_exponent;
use crate::error::{invalid, Result};

/// Where `p1 <= L_1^A (p0^{d+8} + exp(-c L_0^delta))` holds in the `(A, c)` plane.
///
/// For each `c` the inequality holds exactly for `A >= min_exponent(c)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecursionReport {
    pub l0: u64,
    pub l1: f64,
    pub dim: usize,
    pub p0: f64,
    pub p1: f64,
    /// `(c, smallest feasible A)`, with `A` clamped at 0.
    pub frontier: Vec<(f64, f64)>,
}

impl RecursionReport {
    pub fn bound(&self, a: f64, c: f64) -> f64 {
        let delta = decoupling_exponent(self.dim);
        self.l1.powf(a) * (self.p0.powi(self.dim as i32 + 8) + (-c * (self.l0 as f64).powf(delta)).exp())
    }

    pub fn feasible(&self, a: f64, c: f64) -> bool {
        self.p1 <= self.bound(a, c)
    }

    pub fn min_exponent(&self, c: f64) -> f64 {
        let delta = decoupling_exponent(self.dim);
        let base = self.p0.powi(self.dim as i32 + 8) + (-c * (self.l0 as f64).powf(delta)).exp();
        if self.p1 <= base {
            0.0
        } else {
            (self.p1 / base).ln() / self.l1.ln()
        }
    }
}

pub fn recursion_report(ladder: &ScaleLadder, p0: f64, p1: f64, c_grid: &[f64]) -> Result<RecursionReport> {
    if ladder.k_max() < 1 {
        return Err(invalid("ladder", "needs scale 1"));
    }
    for (name, p) in [("p0", p0), ("p1", p1)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid(name, format!("{p} outside [0, 1]")));
        }
    }
    let mut r = RecursionReport {
        l0: ladder.scales[0] as u64,
        l1: ladder.scales[1] as f64,
        dim: ladder.dim,
        p0,
        p1,
        frontier: Vec::new(),
    };
    r.frontier = c_grid.iter().map(|&c| (c, r.min_exponent(c))).collect();
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ladder() -> ScaleLadder {
        ScaleLadder::new(4, 1, 1).unwrap()
    }

    #[test]
    fn zero_p0_feasible_everywhere() {
        let r = recursion_report(&ladder(), 0.0, 0.0, &[0.1, 1.0, 10.0]).unwrap();
        assert!(r.frontier.iter().all(|&(_, a)| a == 0.0));
        assert!(r.feasible(0.0, 100.0));
    }

    #[test]
    fn unit_p0_bound_is_at_least_one() {
        let r = recursion_report(&ladder(), 1.0, 1.0, &[0.5, 5.0]).unwrap();
        for a in [0.0, 0.5, 3.0] {
            for c in [0.0, 1.0, 50.0] {
                assert!(r.bound(a, c) >= 1.0);
                assert!(r.feasible(a, c));
            }
        }
    }

    #[test]
    fn frontier_is_the_boundary() {
        let r = recursion_report(&ladder(), 0.3, 0.2, &[2.0, 4.0, 8.0]).unwrap();
        for &(c, a) in &r.frontier {
            assert!(a > 0.0);
            assert!(r.feasible(a + 1e-9, c));
            assert!(!r.feasible(a - 1e-6, c));
        }
        assert!(r.frontier.windows(2).all(|w| w[1].1 >= w[0].1));
    }
}
