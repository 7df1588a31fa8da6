//! Lattice geometry on `Z^d` and the nearest-neighbour jump law.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Largest supported lattice dimension.
pub const MAX_DIM: usize = 4;

const SUM_TOLERANCE: f64 = 1e-12;

/// A point of `Z^d`. Unused trailing coordinates are kept at zero so that the
/// derived ordering is lexicographic on the live coordinates.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site {
    coords: [i64; MAX_DIM],
    dim: u8,
}

impl Site {
    pub fn new(coords: &[i64]) -> Self {
        assert!(
            (1..=MAX_DIM).contains(&coords.len()),
            "site dimension {} outside 1..={MAX_DIM}",
            coords.len()
        );
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Site { coords: c, dim: coords.len() as u8 }
    }

    pub fn origin(dim: usize) -> Self {
        Site::new(&vec![0; dim])
    }

    /// `x * e_1` in dimension `dim`.
    pub fn on_axis(dim: usize, x: i64) -> Self {
        let mut s = Site::origin(dim);
        s.coords[0] = x;
        s
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords[..self.dim as usize]
    }

    /// First coordinate `<x, e_1>`.
    pub fn first(&self) -> i64 {
        self.coords[0]
    }

    pub fn step(&self, dir: Direction) -> Site {
        let mut s = *self;
        s.coords[dir.axis as usize] += if dir.positive { 1 } else { -1 };
        s
    }

    pub fn offset(&self, other: &Site) -> Site {
        let mut s = *self;
        for i in 0..self.dim() {
            s.coords[i] += other.coords[i];
        }
        s
    }

    pub fn sub(&self, other: &Site) -> Site {
        let mut s = *self;
        for i in 0..self.dim() {
            s.coords[i] -= other.coords[i];
        }
        s
    }

    pub fn linf_norm(&self) -> i64 {
        self.coords().iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    pub fn l1_norm(&self) -> i64 {
        self.coords().iter().map(|c| c.abs()).sum()
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.coords())
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coords().iter().map(|c| c.to_string()).collect();
        write!(f, "{}", parts.join(":"))
    }
}

/// A unit displacement `±e_axis`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Direction {
    pub axis: u8,
    pub positive: bool,
}

/// Nearest-neighbour jump law `p(±e_i)`, validated on construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "JumpLawSpec", into = "JumpLawSpec")]
pub struct JumpDistribution {
    prob_pos: Vec<f64>,
    prob_neg: Vec<f64>,
    // cumulative weights in the order +e_1, -e_1, +e_2, -e_2, ...
    cumulative: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct JumpLawSpec {
    p_pos: Vec<f64>,
    p_neg: Vec<f64>,
}

impl TryFrom<JumpLawSpec> for JumpDistribution {
    type Error = ModelError;
    fn try_from(s: JumpLawSpec) -> Result<Self, ModelError> {
        JumpDistribution::new(s.p_pos, s.p_neg)
    }
}

impl From<JumpDistribution> for JumpLawSpec {
    fn from(p: JumpDistribution) -> Self {
        JumpLawSpec { p_pos: p.prob_pos, p_neg: p.prob_neg }
    }
}

impl JumpDistribution {
    pub fn new(prob_pos: Vec<f64>, prob_neg: Vec<f64>) -> Result<Self, ModelError> {
        let d = prob_pos.len();
        if d == 0 || d > MAX_DIM {
            return Err(ModelError::Dimension(d));
        }
        if prob_neg.len() != d {
            return Err(ModelError::LengthMismatch { pos: d, neg: prob_neg.len() });
        }
        for (i, (&a, &b)) in prob_pos.iter().zip(&prob_neg).enumerate() {
            for (sign, v) in [('+', a), ('-', b)] {
                if !(v > 0.0 && v < 1.0) {
                    return Err(ModelError::Probability { axis: i + 1, sign, value: v });
                }
            }
        }
        let sum: f64 = prob_pos.iter().chain(&prob_neg).sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(ModelError::Sum(sum));
        }
        let mut cumulative = Vec::with_capacity(2 * d);
        let mut acc = 0.0;
        for i in 0..d {
            acc += prob_pos[i];
            cumulative.push(acc);
            acc += prob_neg[i];
            cumulative.push(acc);
        }
        Ok(JumpDistribution { prob_pos, prob_neg, cumulative })
    }

    /// Simple random walk in one dimension with `p(e_1) = right`.
    pub fn one_dim(right: f64) -> Result<Self, ModelError> {
        JumpDistribution::new(vec![right], vec![1.0 - right])
    }

    /// Uniform law `1/(2d)` on all neighbours.
    pub fn symmetric(dim: usize) -> Result<Self, ModelError> {
        let w = 1.0 / (2 * dim) as f64;
        JumpDistribution::new(vec![w; dim], vec![w; dim])
    }

    pub fn dim(&self) -> usize {
        self.prob_pos.len()
    }

    pub fn prob_pos(&self) -> &[f64] {
        &self.prob_pos
    }

    pub fn prob_neg(&self) -> &[f64] {
        &self.prob_neg
    }

    pub fn prob(&self, dir: Direction) -> f64 {
        if dir.positive {
            self.prob_pos[dir.axis as usize]
        } else {
            self.prob_neg[dir.axis as usize]
        }
    }

    /// All `2d` directions with their probabilities.
    pub fn directions(&self) -> impl Iterator<Item = (Direction, f64)> + '_ {
        (0..self.dim()).flat_map(move |i| {
            [true, false].into_iter().map(move |positive| {
                let dir = Direction { axis: i as u8, positive };
                (dir, self.prob(dir))
            })
        })
    }

    pub fn drift(&self) -> DriftVector {
        DriftVector(self.prob_pos.iter().zip(&self.prob_neg).map(|(a, b)| a - b).collect())
    }

    /// Draw one step. Consumes exactly one uniform from `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Direction {
        let u: f64 = rng.random();
        let last = self.cumulative.len() - 1;
        let k = self.cumulative[..last].iter().position(|&c| u < c).unwrap_or(last);
        Direction { axis: (k / 2) as u8, positive: k % 2 == 0 }
    }

    /// The law of `-X`.
    pub fn reversed(&self) -> Self {
        JumpDistribution::new(self.prob_neg.clone(), self.prob_pos.clone())
            .expect("reversal preserves validity")
    }

    pub fn apply(&self, t: &OrientationTransform) -> Self {
        let d = self.dim();
        let mut pos = vec![0.0; d];
        let mut neg = vec![0.0; d];
        // new axis i takes old axis permutation[i], then reflections apply on new axes
        for i in 0..d {
            let old = t.permutation[i];
            let (a, b) = (self.prob_pos[old], self.prob_neg[old]);
            if t.reflect[i] {
                pos[i] = b;
                neg[i] = a;
            } else {
                pos[i] = a;
                neg[i] = b;
            }
        }
        JumpDistribution::new(pos, neg).expect("transform preserves validity")
    }

    /// True iff `p(e_i) <= p(-e_i)` for all `i` and `p(e_1) < p(-e_1)`.
    pub fn is_canonical(&self) -> bool {
        self.prob_pos.iter().zip(&self.prob_neg).all(|(a, b)| a <= b)
            && self.prob_pos[0] < self.prob_neg[0]
    }
}

/// Mean displacement per unit time, `v_i = p(e_i) - p(-e_i)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftVector(pub Vec<f64>);

impl DriftVector {
    pub fn first(&self) -> f64 {
        self.0[0]
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn abs_sum(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).sum()
    }
}

/// Coordinate permutation followed by reflections. Axis `i` of the result is
/// axis `permutation[i]` of the input, negated when `reflect[i]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrientationTransform {
    pub permutation: Vec<usize>,
    pub reflect: Vec<bool>,
}

impl OrientationTransform {
    pub fn identity(dim: usize) -> Self {
        OrientationTransform { permutation: (0..dim).collect(), reflect: vec![false; dim] }
    }

    pub fn is_identity(&self) -> bool {
        self.permutation.iter().enumerate().all(|(i, &p)| i == p) && !self.reflect.iter().any(|&r| r)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Orientation {
    /// Already satisfies the canonical ordering.
    Canonical,
    /// Canonical after applying the transform.
    Transformable(OrientationTransform),
    /// Every drift component vanishes; the small/large density regimes do not apply.
    ZeroDrift,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientationReport {
    pub drift: DriftVector,
    pub orientation: Orientation,
}

/// Validate a raw law and report how to reach canonical orientation.
pub fn validate(p_pos: &[f64], p_neg: &[f64]) -> Result<OrientationReport, ModelError> {
    let p = JumpDistribution::new(p_pos.to_vec(), p_neg.to_vec())?;
    Ok(orientation(&p))
}

pub fn orientation(p: &JumpDistribution) -> OrientationReport {
    let drift = p.drift();
    if p.is_canonical() {
        return OrientationReport { drift, orientation: Orientation::Canonical };
    }
    let d = p.dim();
    let Some(lead) = drift.0.iter().position(|&v| v != 0.0) else {
        return OrientationReport { drift, orientation: Orientation::ZeroDrift };
    };
    let mut t = OrientationTransform::identity(d);
    t.permutation.swap(0, lead);
    for i in 0..d {
        t.reflect[i] = drift.0[t.permutation[i]] > 0.0;
    }
    OrientationReport { drift, orientation: Orientation::Transformable(t) }
}

/// Finite product of integer intervals `[lo_i, hi_i]` (inclusive).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SiteBox {
    pub lo: Site,
    pub hi: Site,
}

impl Serialize for Site {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Site {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Vec::<i64>::deserialize(d)?;
        if v.is_empty() || v.len() > MAX_DIM {
            return Err(serde::de::Error::custom(format!("site dimension {} unsupported", v.len())));
        }
        Ok(Site::new(&v))
    }
}

impl SiteBox {
    pub fn new(lo: Site, hi: Site) -> Result<Self, ModelError> {
        if lo.dim() != hi.dim() {
            return Err(ModelError::Dimension(hi.dim()));
        }
        if lo.coords().iter().zip(hi.coords()).any(|(a, b)| a > b) {
            return Err(ModelError::EmptyBox(format!("{lo:?}..={hi:?}")));
        }
        Ok(SiteBox { lo, hi })
    }

    /// `[-r, r]^d`.
    pub fn centered(dim: usize, r: i64) -> Self {
        SiteBox { lo: Site::new(&vec![-r; dim]), hi: Site::new(&vec![r; dim]) }
    }

    /// `[a, b]^d`.
    pub fn cube(dim: usize, a: i64, b: i64) -> Self {
        SiteBox { lo: Site::new(&vec![a; dim]), hi: Site::new(&vec![b; dim]) }
    }

    pub fn dim(&self) -> usize {
        self.lo.dim()
    }

    pub fn side(&self, axis: usize) -> i64 {
        self.hi.coords[axis] - self.lo.coords[axis] + 1
    }

    pub fn volume(&self) -> u64 {
        (0..self.dim()).map(|i| self.side(i) as u64).product()
    }

    pub fn contains(&self, s: &Site) -> bool {
        (0..self.dim()).all(|i| self.lo.coords[i] <= s.coords[i] && s.coords[i] <= self.hi.coords[i])
    }

    /// Grow by `r` on every side.
    pub fn expand(&self, r: i64) -> Self {
        let mut lo = self.lo;
        let mut hi = self.hi;
        for i in 0..self.dim() {
            lo.coords[i] -= r;
            hi.coords[i] += r;
        }
        SiteBox { lo, hi }
    }

    /// Row-major index of `s`, or `None` outside the box.
    pub fn index(&self, s: &Site) -> Option<usize> {
        let mut idx = 0usize;
        for i in 0..self.dim() {
            let c = s.coords[i];
            if c < self.lo.coords[i] || c > self.hi.coords[i] {
                return None;
            }
            idx = idx * self.side(i) as usize + (c - self.lo.coords[i]) as usize;
        }
        Some(idx)
    }

    pub fn site_at(&self, mut idx: usize) -> Site {
        let mut s = self.lo;
        for i in (0..self.dim()).rev() {
            let side = self.side(i) as usize;
            s.coords[i] = self.lo.coords[i] + (idx % side) as i64;
            idx /= side;
        }
        s
    }

    /// Sites in lexicographic order.
    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.volume() as usize).map(move |i| self.site_at(i))
    }

    /// `l_inf` distance from `s` to the box (0 inside).
    pub fn linf_distance(&self, s: &Site) -> i64 {
        (0..self.dim())
            .map(|i| {
                let c = s.coords[i];
                (self.lo.coords[i] - c).max(c - self.hi.coords[i]).max(0)
            })
            .max()
            .unwrap_or(0)
    }
}

/// A space-time box: spatial part times `[t_lo, t_hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeBox {
    pub sites: SiteBox,
    pub t_lo: f64,
    pub t_hi: f64,
}

impl SpaceTimeBox {
    pub fn new(sites: SiteBox, t_lo: f64, t_hi: f64) -> Result<Self, ModelError> {
        if !(t_lo <= t_hi) {
            return Err(ModelError::EmptyBox(format!("time interval [{t_lo}, {t_hi}]")));
        }
        Ok(SpaceTimeBox { sites, t_lo, t_hi })
    }

    pub fn contains(&self, s: &Site, t: f64) -> bool {
        self.t_lo <= t && t <= self.t_hi && self.sites.contains(s)
    }

    /// Time distance to another box (zero when the intervals overlap).
    pub fn time_distance(&self, other: &SpaceTimeBox) -> f64 {
        (other.t_lo - self.t_hi).max(self.t_lo - other.t_hi).max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    #[test]
    fn drift_examples() {
        let p = JumpDistribution::one_dim(0.25).unwrap();
        assert_eq!(p.drift().0, vec![-0.5]);
        let p = JumpDistribution::symmetric(2).unwrap();
        assert_eq!(p.drift().0, vec![0.0, 0.0]);
        let p = JumpDistribution::new(vec![0.2], vec![0.8]).unwrap();
        assert_eq!(p.drift().0, vec![0.2 - 0.8]);
        assert!((p.drift().0[0] + 0.6).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_laws() {
        assert!(matches!(JumpDistribution::new(vec![1.0], vec![0.0]), Err(ModelError::Probability { .. })));
        assert!(matches!(JumpDistribution::new(vec![0.0], vec![1.0]), Err(ModelError::Probability { .. })));
        assert!(matches!(JumpDistribution::new(vec![0.3], vec![0.3]), Err(ModelError::Sum(_))));
        assert!(matches!(JumpDistribution::new(vec![0.3, 0.2], vec![0.5]), Err(ModelError::LengthMismatch { .. })));
        assert!(matches!(JumpDistribution::new(vec![], vec![]), Err(ModelError::Dimension(0))));
        // within the 1e-12 tolerance
        assert!(JumpDistribution::new(vec![0.25 + 5e-13], vec![0.75]).is_ok());
    }

    #[test]
    fn orientation_examples() {
        let r = validate(&[0.25, 0.25], &[0.25, 0.25]).unwrap();
        assert_eq!(r.orientation, Orientation::ZeroDrift);

        let r = validate(&[0.3], &[0.7]).unwrap();
        assert_eq!(r.orientation, Orientation::Canonical);

        // p(e1) = 0.3, p(-e1) = 0.2 is not a law on its own; scale to sum 1 keeping the ratio
        let r = validate(&[0.6], &[0.4]).unwrap();
        match r.orientation {
            Orientation::Transformable(t) => {
                assert_eq!(t.permutation, vec![0]);
                assert_eq!(t.reflect, vec![true]);
            }
            o => panic!("unexpected {o:?}"),
        }

        // drift only along e2
        let r = validate(&[0.25, 0.2], &[0.25, 0.3]).unwrap();
        match r.orientation {
            Orientation::Transformable(t) => {
                assert_eq!(t.permutation, vec![1, 0]);
                assert_eq!(t.reflect, vec![false, false]);
            }
            o => panic!("unexpected {o:?}"),
        }
    }

    #[test]
    fn sampling_frequencies_within_four_sigma() {
        let p = JumpDistribution::new(vec![0.1, 0.2], vec![0.3, 0.4]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let mut counts = [0u64; 4];
        for _ in 0..n {
            let dir = p.sample(&mut rng);
            counts[dir.axis as usize * 2 + usize::from(!dir.positive)] += 1;
        }
        let probs = [0.1, 0.3, 0.2, 0.4];
        for (c, q) in counts.iter().zip(probs) {
            let sigma = (n as f64 * q * (1.0 - q)).sqrt();
            assert!((*c as f64 - n as f64 * q).abs() < 4.0 * sigma, "{counts:?}");
        }
    }

    fn first_draws() -> String {
        let p = JumpDistribution::new(vec![0.1, 0.2], vec![0.3, 0.4]).unwrap();
        let mut rng = crate::engine::RandomSource::new(20_240_601).rng();
        (0..100)
            .map(|_| {
                let d = p.sample(&mut rng);
                format!("{}{}", if d.positive { '+' } else { '-' }, d.axis + 1)
            })
            .collect::<Vec<_>>()
            .join("\n")
            + "\n"
    }

    #[test]
    fn first_hundred_draws_match_golden_file() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/first_draws.txt");
        if std::env::var_os("DRIFTLAB_BLESS").is_some() {
            std::fs::write(path, first_draws()).unwrap();
        }
        assert_eq!(first_draws(), std::fs::read_to_string(path).unwrap());
    }

    #[test]
    fn box_indexing_roundtrip() {
        let b = SiteBox::new(Site::new(&[-2, 3]), Site::new(&[1, 5])).unwrap();
        assert_eq!(b.volume(), 12);
        for (i, s) in b.sites().enumerate() {
            assert_eq!(b.index(&s), Some(i));
        }
        assert_eq!(b.index(&Site::new(&[2, 3])), None);
        assert_eq!(b.linf_distance(&Site::new(&[4, 4])), 3);
    }

    fn law_strategy() -> impl Strategy<Value = JumpDistribution> {
        (1usize..=3)
            .prop_flat_map(|d| proptest::collection::vec(0.05f64..1.0, 2 * d))
            .prop_map(|w| {
                let total: f64 = w.iter().sum();
                let d = w.len() / 2;
                let pos: Vec<f64> = w[..d].iter().map(|x| x / total).collect();
                let mut neg: Vec<f64> = w[d..].iter().map(|x| x / total).collect();
                let s: f64 = pos.iter().chain(&neg[..d - 1]).sum();
                neg[d - 1] = 1.0 - s;
                JumpDistribution::new(pos, neg).unwrap()
            })
    }

    proptest! {
        #[test]
        fn reversed_law_negates_drift(p in law_strategy()) {
            let v = p.drift();
            let w = p.reversed().drift();
            for (a, b) in v.0.iter().zip(&w.0) {
                prop_assert!((a + b).abs() < 1e-15);
            }
        }

        #[test]
        fn suggested_transform_reaches_canonical(p in law_strategy()) {
            match orientation(&p).orientation {
                Orientation::Canonical => prop_assert!(p.is_canonical()),
                Orientation::ZeroDrift => prop_assert!(p.drift().0.iter().all(|&v| v == 0.0)),
                Orientation::Transformable(t) => {
                    let q = p.apply(&t);
                    prop_assert!(q.is_canonical());
                    prop_assert_eq!(orientation(&q).orientation, Orientation::Canonical);
                }
            }
        }
    }
}
