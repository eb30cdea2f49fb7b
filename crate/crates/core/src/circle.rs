//! Arithmetic on the circle S^1 = R/Z with the metric
//! d(x, y) = min(|x - y|, 1 - |x - y|).

use alloc::vec::Vec;

/// Diameter of the circle in the chosen metric.
pub const DIAM: f64 = 0.5;

/// Reduce a real number into the fundamental domain [0, 1).
pub fn wrap(x: f64) -> f64 {
    let y = x - libm::floor(x);
    // rounding can produce exactly 1.0 for tiny negative inputs
    if y >= 1.0 {
        0.0
    } else {
        y
    }
}

/// Circle distance between two points.
pub fn dist(x: f64, y: f64) -> f64 {
    let d = libm::fabs(wrap(x) - wrap(y));
    if d > 0.5 {
        1.0 - d
    } else {
        d
    }
}

/// Representative of x in [-1/2, 1/2), measuring signed displacement from 0.
pub fn signed(x: f64) -> f64 {
    let y = wrap(x);
    if y >= 0.5 {
        y - 1.0
    } else {
        y
    }
}

/// Half-open arc [lo, lo + len) on the circle, 0 < len <= 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CircleArc {
    lo: f64,
    len: f64,
}

impl CircleArc {
    pub fn new(lo: f64, len: f64) -> Self {
        assert!(len > 0.0 && len <= 1.0, "arc length must lie in (0, 1]");
        CircleArc { lo: wrap(lo), len }
    }

    /// Arc running forward from `lo` to `hi`; `hi` may wrap past 1.
    pub fn from_endpoints(lo: f64, hi: f64) -> Self {
        let lo = wrap(lo);
        let mut len = wrap(hi) - lo;
        if len <= 0.0 {
            len += 1.0;
        }
        CircleArc { lo, len }
    }

    pub fn full() -> Self {
        CircleArc { lo: 0.0, len: 1.0 }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        wrap(self.lo + self.len)
    }

    pub fn len(&self) -> f64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, x: f64) -> bool {
        let off = wrap(x - self.lo);
        off < self.len
    }

    pub fn intersects(&self, other: &CircleArc) -> bool {
        wrap(other.lo - self.lo) < self.len || wrap(self.lo - other.lo) < other.len
    }

    /// Non-wrapping pieces of the arc inside [0, 1].
    pub fn intervals(&self) -> Vec<(f64, f64)> {
        let hi = self.lo + self.len;
        if hi <= 1.0 {
            alloc::vec![(self.lo, hi)]
        } else {
            alloc::vec![(self.lo, 1.0), (0.0, hi - 1.0)]
        }
    }
}

/// Finite union of disjoint half-open intervals inside [0, 1], kept sorted.
/// Backs the set algebra needed for covers and partitions.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IntervalSet {
    parts: Vec<(f64, f64)>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        IntervalSet { parts: Vec::new() }
    }

    pub fn from_parts(mut parts: Vec<(f64, f64)>) -> Self {
        parts.retain(|&(a, b)| b > a);
        parts.sort_by(|x, y| x.0.total_cmp(&y.0));
        // merge touching or overlapping pieces
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(parts.len());
        for (a, b) in parts {
            match merged.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        IntervalSet { parts: merged }
    }

    pub fn from_arc(arc: &CircleArc) -> Self {
        IntervalSet::from_parts(arc.intervals())
    }

    pub fn parts(&self) -> &[(f64, f64)] {
        &self.parts
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn total_len(&self) -> f64 {
        self.parts.iter().map(|&(a, b)| b - a).sum()
    }

    pub fn contains(&self, x: f64) -> bool {
        let x = wrap(x);
        self.parts.iter().any(|&(a, b)| x >= a && x < b)
    }

    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        let mut parts = self.parts.clone();
        parts.extend_from_slice(&other.parts);
        IntervalSet::from_parts(parts)
    }

    pub fn subtract(&self, other: &IntervalSet) -> IntervalSet {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for &(a, b) in &self.parts {
            let mut lo = a;
            for &(c, d) in &other.parts {
                if d <= lo || c >= b {
                    continue;
                }
                if c > lo {
                    out.push((lo, c));
                }
                lo = lo.max(d);
                if lo >= b {
                    break;
                }
            }
            if lo < b {
                out.push((lo, b));
            }
        }
        IntervalSet::from_parts(out)
    }

    pub fn intersect(&self, other: &IntervalSet) -> IntervalSet {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for &(a, b) in &self.parts {
            for &(c, d) in &other.parts {
                let lo = a.max(c);
                let hi = b.min(d);
                if hi > lo {
                    out.push((lo, hi));
                }
            }
        }
        IntervalSet::from_parts(out)
    }

    pub fn intersects(&self, other: &IntervalSet) -> bool {
        for &(a, b) in &self.parts {
            for &(c, d) in &other.parts {
                if a < d && c < b {
                    return true;
                }
            }
        }
        false
    }

    /// True when the set covers [0, 1) up to the given gap tolerance.
    pub fn covers_circle(&self, tol: f64) -> bool {
        if self.parts.is_empty() {
            return false;
        }
        if self.parts[0].0 > tol {
            return false;
        }
        let mut reach = self.parts[0].1;
        for &(a, b) in &self.parts[1..] {
            if a > reach + tol {
                return false;
            }
            reach = reach.max(b);
        }
        reach >= 1.0 - tol
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_and_dist() {
        assert_eq!(wrap(1.25), 0.25);
        assert_eq!(wrap(-0.25), 0.75);
        assert_eq!(wrap(3.0), 0.0);
        assert!((dist(0.1, 0.9) - 0.2).abs() < 1e-15);
        assert_eq!(dist(0.0, 0.5), 0.5);
        assert_eq!(signed(0.75), -0.25);
    }

    #[test]
    fn arc_membership_wraps() {
        let a = CircleArc::from_endpoints(0.9, 0.1);
        assert!(a.contains(0.95));
        assert!(a.contains(0.05));
        assert!(!a.contains(0.5));
        assert!((a.len() - 0.2).abs() < 1e-15);
        let b = CircleArc::from_endpoints(0.05, 0.2);
        assert!(a.intersects(&b));
        let c = CircleArc::from_endpoints(0.3, 0.6);
        assert!(!a.intersects(&c));
    }

    #[test]
    fn interval_subtraction() {
        let full = IntervalSet::from_parts(alloc::vec![(0.0, 1.0)]);
        let mid = IntervalSet::from_parts(alloc::vec![(0.25, 0.5)]);
        let rest = full.subtract(&mid);
        assert_eq!(rest.parts(), &[(0.0, 0.25), (0.5, 1.0)]);
        assert!(rest.union(&mid).covers_circle(0.0));
        assert!((rest.total_len() - 0.75).abs() < 1e-15);
    }
}
