use serde::{Deserialize, Serialize};

use crate::coupling::sprinkle_exponent;
use crate::error::{invalid, Error, Result};

/// Scales `L_{k+1} = L_k^{d+7}`, velocities decreasing from 8 towards 7, and
/// densities `rho_{k+1} = rho_k (1 + L_k^{-d/(4 sqrt(d+2))})` from `rho_0 = sqrt(L_0)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleLadder {
    pub dim: usize,
    pub scales: Vec<u128>,
    pub velocities: Vec<f64>,
    pub densities: Vec<f64>,
    /// Limit of the density sequence.
    pub density_limit: f64,
}

pub fn velocity(k: usize) -> f64 {
    let s: f64 = (1..=k).map(|j| 1.0 / (j * j) as f64).sum();
    8.0 - 6.0 / (std::f64::consts::PI * std::f64::consts::PI) * s
}

fn checked_pow(base: u128, exp: u32) -> Option<u128> {
    base.checked_pow(exp)
}

impl ScaleLadder {
    pub fn new(l0: u64, dim: usize, k_max: usize) -> Result<Self> {
        if l0 < 2 {
            return Err(invalid("l0", format!("{l0} must be at least 2")));
        }
        if dim == 0 || dim > crate::lattice::MAX_DIM {
            return Err(invalid("dim", format!("{dim} outside 1..={}", crate::lattice::MAX_DIM)));
        }
        let e = (dim + 7) as u32;
        let mut scales = vec![l0 as u128];
        for k in 1..=k_max {
            let next = checked_pow(scales[k - 1], e).ok_or(Error::ScaleOverflow { k })?;
            scales.push(next);
        }
        let velocities: Vec<f64> = (0..=k_max).map(velocity).collect();
        let a = sprinkle_exponent(dim);
        let mut densities = vec![(l0 as f64).sqrt()];
        for k in 0..k_max {
            let lk = scales[k] as f64;
            let next = densities[k] * (1.0 + lk.powf(-a));
            let bound = lk * lk;
            if next > bound {
                return Err(Error::DensityTooLarge { k: k + 1, prev: k, rho: next, bound });
            }
            densities.push(next);
        }
        let mut density_limit = densities[k_max];
        let mut lk = scales[k_max] as f64;
        for _ in 0..64 {
            let f = lk.powf(-a);
            if f < 1e-17 {
                break;
            }
            density_limit *= 1.0 + f;
            lk = lk.powi(e as i32);
        }
        Ok(ScaleLadder { dim, scales, velocities, densities, density_limit })
    }

    pub fn k_max(&self) -> usize {
        self.scales.len() - 1
    }

    /// Spatial half-width `L_k^{d+6}` of the box at scale `k`, if representable.
    pub fn half_width(&self, k: usize) -> Option<u128> {
        checked_pow(self.scales[k], (self.dim + 6) as u32)
    }

    /// Exact number of indices of scale `k` inside the box of scale `k + 1`.
    pub fn index_count(&self, k: usize) -> Option<u128> {
        let h = self.half_width(k + 1)?;
        let side = h.checked_mul(2)?.checked_add(1)?;
        let times = self.scales[k + 1] / self.scales[k] + 1;
        checked_pow(side, self.dim as u32)?.checked_mul(times)
    }

    /// `L_{k+1}^{d+1}`.
    pub fn index_bound(&self, k: usize) -> Option<u128> {
        checked_pow(self.scales[k + 1], (self.dim + 1) as u32)
    }

    pub fn boxes(&self, k: usize) -> Result<RenormBox> {
        let h = self.half_width(k).filter(|&h| h <= i64::MAX as u128).ok_or(Error::ScaleOverflow { k })?;
        Ok(RenormBox { k, half_width: h as i64, duration: self.scales[k] as f64, velocity: self.velocities[k] })
    }
}

/// The box `B_k = [-L_k^{d+6}, L_k^{d+6}]^d x [0, L_k]` and its boundary set,
/// in coordinates relative to the anchor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenormBox {
    pub k: usize,
    pub half_width: i64,
    pub duration: f64,
    pub velocity: f64,
}

impl RenormBox {
    /// Front threshold at the final time.
    pub fn front_threshold(&self) -> f64 {
        self.velocity * self.duration
    }

    pub fn in_box(&self, x: &[i64], t: f64) -> bool {
        x.iter().all(|c| c.abs() <= self.half_width) && (0.0..=self.duration).contains(&t)
    }

    /// Membership in the boundary set: on the spatial shell, or beyond the
    /// front threshold at the final time.
    pub fn in_boundary(&self, x: &[i64], t: f64) -> bool {
        self.in_box(x, t)
            && (x.iter().map(|c| c.abs()).max() == Some(self.half_width)
                || (t == self.duration && x[0] as f64 >= self.front_threshold()))
    }

    /// The same box with the front threshold at velocity 7.
    pub fn relaxed(&self) -> Self {
        RenormBox { velocity: 7.0, ..*self }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let l = ScaleLadder::new(2, 1, 2).unwrap();
        assert_eq!(l.scales, vec![2, 256, 1u128 << 64]);
        for k in 0..=2 {
            assert_eq!(l.scales[k], 2u128.pow(8u32.pow(k as u32)));
        }
        assert!((l.velocities[1] - 7.392_072_898).abs() < 1e-8);
        assert_eq!(l.velocities[0], 8.0);
        let r1 = 2f64.sqrt() * (1.0 + 2f64.powf(-1.0 / (4.0 * 3f64.sqrt())));
        assert!((l.densities[1] - r1).abs() < 1e-14);
    }

    #[test]
    fn velocities_decrease_to_seven() {
        let v: Vec<f64> = (0..2000).map(velocity).collect();
        assert!(v.windows(2).all(|w| w[1] < w[0]));
        assert!(v[1999] > 7.0 && v[1999] - 7.0 < 1e-3);
        // recursive definition
        for k in 0..50 {
            let r = velocity(k) - 6.0 / (std::f64::consts::PI.powi(2) * ((k + 1) * (k + 1)) as f64);
            assert!((velocity(k + 1) - r).abs() < 1e-13);
        }
    }

    #[test]
    fn densities_increase_and_stay_bounded() {
        let l = ScaleLadder::new(3, 1, 1).unwrap();
        assert!(l.densities[1] > l.densities[0]);
        assert!(l.density_limit >= l.densities[1]);
        assert!(l.density_limit.is_finite());
        for k in 0..l.k_max() {
            assert!(l.densities[k + 1] <= (l.scales[k] as f64).powi(2));
        }
    }

    #[test]
    fn overflow_names_the_scale() {
        assert!(matches!(ScaleLadder::new(4, 1, 2), Err(Error::ScaleOverflow { k: 2 })));
        assert!(ScaleLadder::new(1, 1, 0).is_err());
    }

    #[test]
    fn boundary_set() {
        let l = ScaleLadder::new(4, 1, 0).unwrap();
        let b = l.boxes(0).unwrap();
        assert_eq!(b.half_width, 16384);
        assert!(b.in_boundary(&[16384], 1.0));
        assert!(b.in_boundary(&[-16384], 0.0));
        assert!(b.in_boundary(&[32], 4.0));
        assert!(!b.in_boundary(&[31], 4.0));
        assert!(!b.in_boundary(&[32], 3.9));
        assert!(b.relaxed().in_boundary(&[28], 4.0));
        assert!(!b.in_boundary(&[16385], 1.0));
    }

    #[test]
    fn index_count_exceeds_stated_bound() {
        let l = ScaleLadder::new(2, 1, 1).unwrap();
        let c = l.index_count(0).unwrap();
        assert_eq!(c, (2 * 256u128.pow(7) + 1) * 129);
        assert!(c > l.index_bound(0).unwrap());
    }
}
