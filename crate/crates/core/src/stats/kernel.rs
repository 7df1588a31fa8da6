//! Exact transition probabilities of the continuous-time walk, meeting
//! probabilities of two independent walks, and lower-bound scans.

use serde::{Deserialize, Serialize};

use super::poisson::poisson_upper_tail;
use crate::error::{invalid, Error, Result};
use crate::lattice::{JumpDistribution, MAX_DIM};

/// Tail mass left out of every table.
pub const KERNEL_TAIL: f64 = 1e-12;
/// Default cap on table cells.
pub const DEFAULT_CELL_BUDGET: u64 = 1 << 24;

/// Smallest `k` with `P[Poisson(t) > k] < KERNEL_TAIL`.
pub fn jump_cutoff(t: f64) -> u64 {
    if t <= 0.0 {
        return 0;
    }
    let mut k = t.ceil() as u64;
    while poisson_upper_tail(t, k + 1) >= KERNEL_TAIL {
        k += 1;
    }
    k
}

/// `P[Poisson(t) = k]` for `k <= k_max`, by recurrence from the mode and
/// normalised over a range wide enough that the rest is below `1e-30`.
pub fn poisson_weights(t: f64, k_max: u64) -> Vec<f64> {
    if t <= 0.0 {
        let mut w = vec![0.0; k_max as usize + 1];
        w[0] = 1.0;
        return w;
    }
    let far = (k_max as f64).max(t + 40.0 * t.sqrt() + 60.0) as usize;
    let mode = (t.floor() as usize).min(far);
    let mut w = vec![0.0; far + 1];
    w[mode] = 1.0;
    for k in mode + 1..=far {
        w[k] = w[k - 1] * t / k as f64;
    }
    for k in (0..mode).rev() {
        w[k] = w[k + 1] * (k + 1) as f64 / t;
    }
    let total = neumaier(w.iter().copied());
    w.truncate(k_max as usize + 1);
    w.iter_mut().for_each(|x| *x /= total);
    w
}

/// Dense table of `P_0[X_t = x]` on `[-radius, radius]^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelTable {
    pub t: f64,
    pub dim: usize,
    pub radius: i64,
    /// Upper bound on the mass outside the table.
    pub truncation_error: f64,
    values: Vec<f64>,
}

fn side(radius: i64) -> usize {
    (2 * radius + 1) as usize
}

fn cells(dim: usize, radius: i64) -> Option<u64> {
    (side(radius) as u64).checked_pow(dim as u32)
}

impl KernelTable {
    fn zeros(t: f64, dim: usize, radius: i64, budget: u64) -> Result<Self> {
        let n = cells(dim, radius).filter(|&n| n <= budget);
        let Some(n) = n else {
            let per_axis = (budget as f64).powf(1.0 / dim as f64).floor() as i64;
            return Err(Error::KernelBudget {
                cells: cells(dim, radius).unwrap_or(u64::MAX),
                budget,
                suggested_radius: ((per_axis - 1) / 2).max(0),
            });
        };
        Ok(KernelTable { t, dim, radius, truncation_error: 0.0, values: vec![0.0; n as usize] })
    }

    fn index(&self, x: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        for &c in x {
            if c.abs() > self.radius {
                return None;
            }
            idx = idx * side(self.radius) + (c + self.radius) as usize;
        }
        Some(idx)
    }

    fn coords(&self, mut idx: usize) -> [i64; MAX_DIM] {
        let s = side(self.radius);
        let mut c = [0i64; MAX_DIM];
        for i in (0..self.dim).rev() {
            c[i] = (idx % s) as i64 - self.radius;
            idx /= s;
        }
        c
    }

    /// `P_0[X_t = x]`, zero outside the table.
    pub fn get(&self, x: &[i64]) -> f64 {
        self.index(x).map_or(0.0, |i| self.values[i])
    }

    /// Compensated total mass.
    pub fn mass(&self) -> f64 {
        neumaier(self.values.iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = ([i64; MAX_DIM], f64)> + '_ {
        self.values.iter().enumerate().filter(|(_, &v)| v > 0.0).map(|(i, &v)| (self.coords(i), v))
    }
}

/// Neumaier compensated summation.
pub fn neumaier(xs: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// `P_0[X_t = x] = sum_k P[Poisson(t) = k] P^k(0, x)` by iterated convolution,
/// truncated at `k = jump_cutoff(t)`.
pub fn exact_kernel(law: &JumpDistribution, t: f64) -> Result<KernelTable> {
    exact_kernel_with_budget(law, t, DEFAULT_CELL_BUDGET)
}

pub fn exact_kernel_with_budget(law: &JumpDistribution, t: f64, budget: u64) -> Result<KernelTable> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid("t", format!("{t} must be finite and nonnegative")));
    }
    let d = law.dim();
    let k_max = jump_cutoff(t);
    let radius = k_max as i64;
    let mut table = KernelTable::zeros(t, d, radius, budget)?;
    let mut step = table.values.clone();
    let origin = table.index(&[0; MAX_DIM][..d]).expect("origin inside");
    step[origin] = 1.0;
    let mut next = vec![0.0; step.len()];
    let stride: Vec<usize> = (0..d).map(|i| side(radius).pow((d - 1 - i) as u32)).collect();
    let moves: Vec<(usize, bool, f64)> = law.directions().map(|(dir, p)| (dir.axis as usize, dir.positive, p)).collect();
    let weights = poisson_weights(t, k_max);
    for k in 0..=k_max {
        let w = weights[k as usize];
        for (a, &s) in table.values.iter_mut().zip(&step) {
            *a += w * s;
        }
        if k == k_max {
            break;
        }
        // support of P^{k+1} lies within radius k + 1 <= k_max
        next.iter_mut().for_each(|v| *v = 0.0);
        for (idx, &s) in step.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            let c = table.coords(idx);
            for &(axis, positive, p) in &moves {
                let target = if positive { c[axis] + 1 } else { c[axis] - 1 };
                if target.abs() > radius {
                    continue;
                }
                let j = if positive { idx + stride[axis] } else { idx - stride[axis] };
                next[j] += p * s;
            }
        }
        std::mem::swap(&mut step, &mut next);
    }
    table.truncation_error = poisson_upper_tail(t, k_max + 1);
    Ok(table)
}

/// The same table built from the split of the walk into independent Poisson
/// drift steps along `sign(v_i) e_i` and a zero-mean walk run for time
/// `t (1 - sum |v_i|)`.
pub fn decomposed_kernel(law: &JumpDistribution, t: f64) -> Result<KernelTable> {
    let d = law.dim();
    let mins: Vec<f64> = (0..d).map(|i| law.prob_pos()[i].min(law.prob_neg()[i])).collect();
    let z: f64 = 2.0 * mins.iter().sum::<f64>();
    if z <= 0.0 {
        return Err(invalid("law", "needs positive mass in both directions of some axis"));
    }
    let q = JumpDistribution::new(mins.iter().map(|m| m / z).collect(), mins.iter().map(|m| m / z).collect())?;
    let drift = law.drift();
    let inner = exact_kernel(&q, t * z)?;
    let cutoffs: Vec<u64> = drift.components().iter().map(|v| jump_cutoff(t * v.abs())).collect();
    let radius = inner.radius + *cutoffs.iter().max().unwrap_or(&0) as i64;
    let mut out = KernelTable::zeros(t, d, radius, DEFAULT_CELL_BUDGET)?;
    for (c, v) in inner.iter() {
        let idx = out.index(&c[..d]).expect("inside");
        out.values[idx] = v;
    }
    let stride: Vec<usize> = (0..d).map(|i| side(radius).pow((d - 1 - i) as u32)).collect();
    let mut dropped = inner.truncation_error;
    for axis in 0..d {
        let v = drift.components()[axis];
        if v == 0.0 {
            continue;
        }
        let mean = t * v.abs();
        let pmf = poisson_weights(mean, cutoffs[axis]);
        dropped += poisson_upper_tail(mean, cutoffs[axis] + 1);
        let mut conv = vec![0.0; out.values.len()];
        for (idx, &s) in out.values.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            let c = out.coords(idx)[axis];
            for (k, &w) in pmf.iter().enumerate() {
                let shift = if v > 0.0 { k as i64 } else { -(k as i64) };
                if (c + shift).abs() > radius {
                    continue;
                }
                let j = (idx as i64 + shift * stride[axis] as i64) as usize;
                conv[j] += w * s;
            }
        }
        out.values = conv;
    }
    out.truncation_error = dropped;
    Ok(out)
}

/// `P[X_t = Y_t]` for independent walks from `x` and `y`.
pub fn meeting_probability(law: &JumpDistribution, x: &[i64], y: &[i64], t: f64) -> Result<f64> {
    let d = law.dim();
    if x.len() != d || y.len() != d {
        return Err(invalid("x/y", format!("need {d} coordinates")));
    }
    let k = exact_kernel(law, t)?;
    let shift: Vec<i64> = (0..d).map(|i| x[i] - y[i]).collect();
    // sum_z K(z - x) K(z - y) = sum_w K(w) K(w + x - y)
    let mut w_plus = vec![0i64; d];
    let terms = k.iter().map(|(w, v)| {
        for i in 0..d {
            w_plus[i] = w[i] + shift[i];
        }
        v * k.get(&w_plus)
    });
    Ok(neumaier(terms.collect::<Vec<_>>().into_iter()))
}

/// Lower-bound scan at one time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloorPoint {
    pub t: f64,
    /// Smallest `value * t^{d/2}` over the scanned window.
    pub floor: f64,
    pub points: usize,
}

/// `min P_0[X_t = x] t^{d/2}` over `||x - vt||_inf <= c sqrt(t)`.
pub fn kernel_floor_scan(law: &JumpDistribution, times: &[f64], window_c: f64) -> Result<Vec<FloorPoint>> {
    let d = law.dim();
    let v = law.drift();
    times
        .iter()
        .map(|&t| {
            let k = exact_kernel(law, t)?;
            let r = window_c * t.sqrt();
            let mut floor = f64::INFINITY;
            let mut points = 0;
            for (x, p) in k.iter() {
                if (0..d).all(|i| (x[i] as f64 - v.components()[i] * t).abs() <= r) {
                    floor = floor.min(p * t.powf(d as f64 / 2.0));
                    points += 1;
                }
            }
            if points == 0 {
                floor = 0.0;
            }
            Ok(FloorPoint { t, floor, points })
        })
        .collect()
}

/// `P[X_t = Y_t] t^{d/2}` with starting points `ratio sqrt(t)` apart along `e_1`.
pub fn meeting_floor_scan(law: &JumpDistribution, times: &[f64], ratio: f64) -> Result<Vec<FloorPoint>> {
    let d = law.dim();
    times
        .iter()
        .map(|&t| {
            let mut x = vec![0i64; d];
            x[0] = (ratio * t.sqrt()).round() as i64;
            let p = meeting_probability(law, &x, &vec![0; d], t)?;
            Ok(FloorPoint { t, floor: p * t.powf(d as f64 / 2.0), points: 1 })
        })
        .collect()
}

/// Largest ratio between positive floors; infinite if some floor is 0.
pub fn floor_spread(points: &[FloorPoint]) -> f64 {
    let lo = points.iter().map(|p| p.floor).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.floor).fold(0.0, f64::max);
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{IncrementSampler, RandomSource};
    use crate::stats::poisson::poisson_pmf;

    fn biased() -> JumpDistribution {
        JumpDistribution::one_dim(0.25).unwrap()
    }

    /// Coordinates of the walk are independent differences of Poisson counts.
    fn skellam_oracle(law: &JumpDistribution, t: f64, x: &[i64]) -> f64 {
        let mut p = 1.0;
        for i in 0..law.dim() {
            let (a, b) = (law.prob_pos()[i] * t, law.prob_neg()[i] * t);
            let mut s = 0.0;
            for n in 0..400u64 {
                let m = n as i64 - x[i];
                if m >= 0 {
                    s += poisson_pmf(a, n) * poisson_pmf(b, m as u64);
                }
            }
            p *= s;
        }
        p
    }

    #[test]
    fn small_time_is_a_point_mass() {
        let k = exact_kernel(&biased(), 1e-9).unwrap();
        assert!((k.get(&[0]) - 1.0).abs() < 1e-8);
        let k = exact_kernel(&biased(), 0.0).unwrap();
        assert_eq!(k.get(&[0]), 1.0);
    }

    #[test]
    fn matches_product_of_skellam_laws() {
        let law2 = JumpDistribution::new(vec![0.1, 0.3], vec![0.4, 0.2]).unwrap();
        let k = exact_kernel(&law2, 3.0).unwrap();
        for x in [[0, 0], [-1, 2], [3, -2], [-4, 0]] {
            assert!((k.get(&x) - skellam_oracle(&law2, 3.0, &x)).abs() < 1e-13);
        }
        let k = exact_kernel(&biased(), 64.0).unwrap();
        for x in [-60, -32, -20, 0, 5] {
            assert!((k.get(&[x]) - skellam_oracle(&biased(), 64.0, &[x])).abs() < 1e-13);
        }
    }

    #[test]
    fn mass_within_truncation() {
        for t in [0.5, 16.0, 64.0, 256.0] {
            let k = exact_kernel(&biased(), t).unwrap();
            let m = k.mass();
            assert!(m >= 1.0 - 1e-12 && m <= 1.0 + 1e-14, "{t}: {m}");
            assert!(k.truncation_error < 1e-12);
        }
    }

    #[test]
    fn symmetric_law_gives_symmetric_table() {
        let law = JumpDistribution::symmetric(2).unwrap();
        let k = exact_kernel(&law, 5.0).unwrap();
        for (x, v) in k.iter() {
            assert_eq!(v, k.get(&[-x[0], -x[1]]));
        }
        let k1 = exact_kernel(&JumpDistribution::symmetric(1).unwrap(), 1.0).unwrap();
        // series for P_0[X_1 = 0]: sum_k e^{-1}/(2k)! C(2k, k) 4^{-k}
        let mut s = 0.0;
        let mut fact = 1.0f64;
        for n in 0..30u32 {
            if n > 0 {
                fact *= n as f64;
            }
            if n % 2 == 0 {
                let m = n / 2;
                let binom: f64 = (1..=m).map(|i| (m + i) as f64 / i as f64).product();
                s += (-1.0f64).exp() / fact * binom / 2f64.powi(n as i32);
            }
        }
        assert!((k1.get(&[0]) - s).abs() < 1e-14);
    }

    #[test]
    fn decomposition_identity() {
        for law in [biased(), JumpDistribution::new(vec![0.1, 0.3], vec![0.4, 0.2]).unwrap()] {
            let a = exact_kernel(&law, 6.0).unwrap();
            let b = decomposed_kernel(&law, 6.0).unwrap();
            let tol = a.truncation_error + b.truncation_error + 1e-14;
            for (x, v) in a.iter() {
                assert!((v - b.get(&x[..law.dim()])).abs() <= tol);
            }
        }
    }

    #[test]
    fn budget_error_suggests_radius() {
        let law = JumpDistribution::symmetric(2).unwrap();
        match exact_kernel_with_budget(&law, 50.0, 10_000) {
            Err(Error::KernelBudget { suggested_radius, .. }) => assert_eq!(suggested_radius, 49),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn kernel_agrees_with_simulation() {
        let law = biased();
        let t = 64.0;
        let k = exact_kernel(&law, t).unwrap();
        let s = IncrementSampler::new(&law, t).unwrap();
        let mut rng = RandomSource::new(12).rng();
        let n = 200_000u64;
        let mut counts = std::collections::HashMap::new();
        for _ in 0..n {
            *counts.entry(s.sample(&mut rng).first()).or_insert(0u64) += 1;
        }
        for x in [-40, -32, -28, -20] {
            let p = k.get(&[x]);
            let f = *counts.get(&x).unwrap_or(&0) as f64 / n as f64;
            assert!((f - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt(), "{x}: {f} vs {p}");
        }
    }

    #[test]
    fn meeting_probability_cases() {
        let law = biased();
        assert!((meeting_probability(&law, &[3], &[3], 1e-9).unwrap() - 1.0).abs() < 1e-8);
        // the difference of two walks is a symmetric walk at rate 2
        let p = meeting_probability(&law, &[2], &[0], 64.0).unwrap();
        let sym = exact_kernel(&JumpDistribution::symmetric(1).unwrap(), 128.0).unwrap();
        assert!((p - sym.get(&[2])).abs() < 1e-12);
    }

    #[test]
    fn floors_are_stable() {
        let law = biased();
        let c = 0.5 * (1.0 - law.drift().abs_sum()).sqrt();
        let k = kernel_floor_scan(&law, &[16.0, 64.0, 256.0], c).unwrap();
        assert!(k.iter().all(|p| p.floor > 0.0 && p.points > 0));
        assert!(floor_spread(&k) < 2.0);
        let m = meeting_floor_scan(&law, &[16.0, 64.0, 256.0], 0.25).unwrap();
        assert!(floor_spread(&m) < 2.0);
    }
}
