//! Finite configurations on the circle and the classical reference sequences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{check_angle, circle_distance};

/// Minimum circle distance between two points of a [`CirclePointSet`].
pub const DISTINCT_TOLERANCE: f64 = 1e-12;

/// Tolerance used when matching a point with its mirror image `1 - x`.
pub const MIRROR_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Seed,
    Greedy,
    Manual,
}

impl Provenance {
    pub fn name(self) -> &'static str {
        match self {
            Provenance::Seed => "seed",
            Provenance::Greedy => "greedy",
            Provenance::Manual => "manual",
        }
    }
}

impl std::str::FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "seed" => Ok(Provenance::Seed),
            "greedy" => Ok(Provenance::Greedy),
            "manual" => Ok(Provenance::Manual),
            other => Err(Error::Domain(format!("unknown provenance `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub angle: f64,
    pub provenance: Provenance,
}

/// Distinct angles in `[0, 1)` kept in insertion order, with a sorted index
/// maintained alongside.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CirclePointSet {
    points: Vec<Point>,
    // positions into `points`, ascending by angle
    sorted: Vec<usize>,
}

/// Arc between two cyclically adjacent points, from `left` counter-clockwise
/// to `right`. May wrap through 0; with a single point the gap is the whole
/// circle and `left == right`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub left: f64,
    pub right: f64,
    pub length: f64,
}

impl Gap {
    /// Whether `x` lies strictly inside the arc.
    pub fn contains(&self, x: f64) -> bool {
        let s = (x - self.left).rem_euclid(1.0);
        s > 0.0 && s < self.length
    }
}

impl CirclePointSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_angles(angles: &[f64], provenance: Provenance) -> Result<Self> {
        let mut set = Self::new();
        for &x in angles {
            set.push(x, provenance)?;
        }
        Ok(set)
    }

    /// Symmetric set `{x, 1 - x}` built pair by pair from one half.
    pub fn mirrored(half: &[f64], provenance: Provenance) -> Result<Self> {
        let mut set = Self::new();
        for &x in half {
            set.push(x, provenance)?;
            set.push(mirror(x), provenance)?;
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    /// Angles in insertion order.
    pub fn angles(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.angle).collect()
    }

    /// Angles in ascending order.
    pub fn sorted_angles(&self) -> Vec<f64> {
        self.sorted.iter().map(|&i| self.points[i].angle).collect()
    }

    /// First `n` points in insertion order.
    pub fn prefix(&self, n: usize) -> Self {
        let points = self.points[..n.min(self.len())].to_vec();
        let mut sorted: Vec<usize> = (0..points.len()).collect();
        sorted.sort_by(|&a, &b| points[a].angle.total_cmp(&points[b].angle));
        Self { points, sorted }
    }

    /// Returns a new set with `x` appended; `self` is left untouched.
    pub fn insert(&self, x: f64, provenance: Provenance) -> Result<Self> {
        let mut next = self.clone();
        next.push(x, provenance)?;
        Ok(next)
    }

    /// Appends `x` in place.
    pub fn push(&mut self, x: f64, provenance: Provenance) -> Result<()> {
        let pos = self.check_insertable(x)?;
        self.points.push(Point {
            angle: x,
            provenance,
        });
        self.sorted.insert(pos, self.points.len() - 1);
        Ok(())
    }

    /// Removes the most recently inserted point.
    pub fn pop(&mut self) -> Option<Point> {
        let last = self.points.pop()?;
        let idx = self.points.len();
        self.sorted.retain(|&i| i != idx);
        Some(last)
    }

    /// Validates `x` against the set and returns its sorted insertion position.
    pub fn check_insertable(&self, x: f64) -> Result<usize> {
        check_angle(x)?;
        let pos = self.sorted.partition_point(|&i| self.points[i].angle < x);
        let n = self.sorted.len();
        if n > 0 {
            for neighbour in [pos % n, (pos + n - 1) % n] {
                let existing = self.points[self.sorted[neighbour]].angle;
                if circle_distance(x, existing) < DISTINCT_TOLERANCE {
                    return Err(Error::Distinctness {
                        angle: x,
                        existing,
                        min_distance: DISTINCT_TOLERANCE,
                    });
                }
            }
        }
        Ok(pos)
    }

    /// Position of a point within `tol` of `x`, if any.
    pub fn find_near(&self, x: f64, tol: f64) -> Option<usize> {
        let n = self.sorted.len();
        if n == 0 {
            return None;
        }
        let pos = self.sorted.partition_point(|&i| self.points[i].angle < x);
        [pos % n, (pos + n - 1) % n]
            .into_iter()
            .map(|k| self.sorted[k])
            .find(|&i| circle_distance(self.points[i].angle, x) <= tol)
    }

    /// The `N` arcs between cyclically adjacent points.
    pub fn gaps(&self) -> Result<Vec<Gap>> {
        if self.is_empty() {
            return Err(Error::State("gaps of an empty set".into()));
        }
        let s = self.sorted_angles();
        let n = s.len();
        Ok((0..n)
            .map(|i| {
                let left = s[i];
                let right = s[(i + 1) % n];
                let length = if i + 1 < n {
                    right - left
                } else {
                    1.0 - left + s[0]
                };
                Gap {
                    left,
                    right,
                    length,
                }
            })
            .collect())
    }

    /// Invariance under `x -> 1 - x (mod 1)`. Points at 0 and 1/2 are their own
    /// mirror images and are accepted.
    pub fn is_symmetric(&self) -> bool {
        self.points
            .iter()
            .all(|p| self.find_near(mirror(p.angle), MIRROR_TOLERANCE).is_some())
    }

    /// Mirror invariance with every point matched to a *different* partner:
    /// no point sits on the axis `{0, 1/2}`. This is the hypothesis under which
    /// the sawtooth field and the discrepancy function coincide.
    pub fn is_paired_symmetric(&self) -> bool {
        self.len().is_multiple_of(2)
            && self.points.iter().all(|p| {
                circle_distance(p.angle, 0.0) > MIRROR_TOLERANCE
                    && circle_distance(p.angle, 0.5) > MIRROR_TOLERANCE
            })
            && self.is_symmetric()
    }
}

/// Mirror image `{1 - x}` of an angle in `[0, 1)`.
pub fn mirror(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        1.0 - x
    }
}

/// Binary radical inverse of `n >= 1`: 1/2, 1/4, 3/4, 1/8, 5/8, ...
pub fn van_der_corput(n: i64) -> Result<f64> {
    if n <= 0 {
        return Err(Error::Domain(format!(
            "van der Corput index {n} must be positive"
        )));
    }
    Ok((n as u64).reverse_bits() as f64 * 2f64.powi(-64))
}

/// `{n alpha}`, the n-th element of the irrational rotation by `alpha`.
pub fn kronecker(n: i64, alpha: f64) -> Result<f64> {
    if n <= 0 {
        return Err(Error::Domain(format!(
            "Kronecker index {n} must be positive"
        )));
    }
    let x = (n as f64 * alpha).rem_euclid(1.0);
    // rem_euclid can round up to exactly 1.0 for tiny negative products
    Ok(if x >= 1.0 { 0.0 } else { x })
}

/// The `N`-th roots of unity, angles `k / N`.
pub fn roots_of_unity(n: usize) -> Result<CirclePointSet> {
    if n == 0 {
        return Err(Error::Domain("roots of unity need N >= 1".into()));
    }
    let angles: Vec<f64> = (0..n).map(|k| k as f64 / n as f64).collect();
    CirclePointSet::from_angles(&angles, Provenance::Seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(xs: &[f64]) -> CirclePointSet {
        CirclePointSet::from_angles(xs, Provenance::Seed).unwrap()
    }

    #[test]
    fn insert_examples() {
        let empty = CirclePointSet::new();
        let one = empty.insert(0.5, Provenance::Seed).unwrap();
        assert_eq!(one.angles(), vec![0.5]);
        assert!(empty.is_empty());
        assert!(matches!(
            one.insert(0.5, Provenance::Greedy),
            Err(Error::Distinctness { .. })
        ));
        let s = set(&[0.0, 0.5]).insert(0.25, Provenance::Greedy).unwrap();
        assert_eq!(s.sorted_angles(), vec![0.0, 0.25, 0.5]);
        assert_eq!(s.angles(), vec![0.0, 0.5, 0.25]);
        assert!(matches!(
            s.insert(1.0, Provenance::Manual),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            s.insert(-0.1, Provenance::Manual),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn distinctness_wraps_around_zero() {
        let s = set(&[0.0]);
        assert!(s.insert(1.0 - 1e-13, Provenance::Manual).is_err());
        assert!(s.insert(1.0 - 1e-11, Provenance::Manual).is_ok());
    }

    #[test]
    fn gaps_examples() {
        assert!(matches!(CirclePointSet::new().gaps(), Err(Error::State(_))));
        let g = set(&[0.0]).gaps().unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!((g[0].left, g[0].right, g[0].length), (0.0, 0.0, 1.0));

        let g = set(&[0.0, 0.5]).gaps().unwrap();
        assert_eq!((g[0].left, g[0].right), (0.0, 0.5));
        assert_eq!((g[1].left, g[1].right), (0.5, 0.0));

        let g = set(&[0.4, 0.1, 0.9]).gaps().unwrap();
        let lengths: Vec<f64> = g.iter().map(|g| g.length).collect();
        for (a, b) in lengths.iter().zip([0.3, 0.5, 0.2]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(g[2].contains(0.95) && g[2].contains(0.05) && !g[2].contains(0.5));
    }

    #[test]
    fn van_der_corput_prefix() {
        let expected = [0.5, 0.25, 0.75, 0.125, 0.625, 0.375, 0.875, 0.0625];
        for (n, e) in (1..).zip(expected) {
            assert_eq!(van_der_corput(n).unwrap(), e);
        }
        assert!(van_der_corput(0).is_err());
        assert!(van_der_corput(-3).is_err());
    }

    #[test]
    fn kronecker_examples() {
        let a = std::f64::consts::SQRT_2;
        assert!((kronecker(1, a).unwrap() - 0.414_213_562_373_095_1).abs() < 1e-15);
        assert!((kronecker(2, a).unwrap() - 0.828_427_124_746_190_1).abs() < 1e-15);
        assert!((kronecker(3, a).unwrap() - 0.242_640_687_119_285_1).abs() < 1e-14);
        assert_eq!(kronecker(1, a).unwrap().to_string(), "0.41421356237309515");
    }

    #[test]
    fn roots_of_unity_examples() {
        assert_eq!(roots_of_unity(1).unwrap().angles(), vec![0.0]);
        assert_eq!(roots_of_unity(2).unwrap().angles(), vec![0.0, 0.5]);
        assert_eq!(
            roots_of_unity(4).unwrap().angles(),
            vec![0.0, 0.25, 0.5, 0.75]
        );
        assert!(roots_of_unity(0).is_err());
        for n in 1..=64 {
            let r = roots_of_unity(n).unwrap();
            assert!(r.is_symmetric(), "N = {n}");
            assert!(!r.is_paired_symmetric());
        }
    }

    #[test]
    fn symmetry_examples() {
        assert!(set(&[0.25, 0.75]).is_symmetric());
        assert!(!set(&[0.25, 0.5]).is_symmetric());
        assert!(set(&[0.1, 0.9, 0.3, 0.7]).is_symmetric());
        assert!(set(&[0.1, 0.9, 0.3, 0.7]).is_paired_symmetric());
        assert!(set(&[0.0, 0.5]).is_symmetric());
        assert!(!set(&[0.0, 0.5]).is_paired_symmetric());
        assert!(!set(&[0.25, 0.75, 0.5]).is_paired_symmetric());
        let m = CirclePointSet::mirrored(&[0.123, 0.377, 1e-9], Provenance::Seed).unwrap();
        assert!(m.is_paired_symmetric());
    }

    proptest! {
        #[test]
        fn push_then_pop_round_trips(xs in prop::collection::vec(0.0f64..1.0, 1..40), extra in 0.0f64..1.0) {
            let mut s = CirclePointSet::new();
            for x in xs {
                let _ = s.push(x, Provenance::Seed);
            }
            let before = s.clone();
            if s.push(extra, Provenance::Manual).is_ok() {
                s.pop();
            }
            prop_assert_eq!(s, before);
        }

        #[test]
        fn gaps_cover_circle(xs in prop::collection::vec(0.0f64..1.0, 1..200)) {
            let mut s = CirclePointSet::new();
            for x in xs {
                let _ = s.push(x, Provenance::Seed);
            }
            let gaps = s.gaps().unwrap();
            prop_assert_eq!(gaps.len(), s.len());
            prop_assert!(gaps.iter().all(|g| g.length > 0.0));
            let total: f64 = gaps.iter().map(|g| g.length).sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
            let sorted = s.sorted_angles();
            prop_assert!(sorted.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
