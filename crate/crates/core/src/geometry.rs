//! Sectorial geometry: sectors, good coverings, and feasible-direction
//! windows on the circle.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Normalize an angle into (-pi, pi].
pub fn normalize_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut x = a % two_pi;
    if x <= -std::f64::consts::PI {
        x += two_pi;
    } else if x > std::f64::consts::PI {
        x -= two_pi;
    }
    x
}

/// Absolute angular distance between two directions, in [0, pi].
pub fn arg_distance(a: f64, b: f64) -> f64 {
    normalize_angle(a - b).abs()
}

/// An open sector with vertex at the origin. `radius = None` means unbounded.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sector {
    pub direction: f64,
    pub half_opening: f64,
    pub radius: Option<f64>,
    pub inner_radius: f64,
}

impl Sector {
    pub fn unbounded(direction: f64, half_opening: f64) -> Self {
        Sector { direction, half_opening, radius: None, inner_radius: 0.0 }
    }

    pub fn bounded(direction: f64, half_opening: f64, radius: f64) -> Self {
        Sector { direction, half_opening, radius: Some(radius), inner_radius: 0.0 }
    }

    pub fn opening(&self) -> f64 {
        2.0 * self.half_opening
    }

    /// Strict membership test; angles compared after normalization into (-pi, pi].
    pub fn contains(&self, theta: f64, r: f64) -> bool {
        if r <= self.inner_radius {
            return false;
        }
        if let Some(rmax) = self.radius {
            if r >= rmax {
                return false;
            }
        }
        arg_distance(theta, self.direction) < self.half_opening
    }

    pub fn contains_point(&self, z: num_complex::Complex64) -> bool {
        self.contains(z.arg(), z.norm())
    }

    /// Angular interval as (lo, hi) around the direction; hi - lo = opening.
    pub fn angular_interval(&self) -> (f64, f64) {
        (self.direction - self.half_opening, self.direction + self.half_opening)
    }
}

/// Which flavor of good covering to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoveringKind {
    /// Openings only need the covering axioms.
    Plain,
    /// Openings must additionally exceed pi / (lambda2 * k2).
    OpeningConstrained,
}

/// A cyclic family of overlapping sectors at the origin.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GoodCovering {
    pub sectors: Vec<Sector>,
    pub kind: CoveringKind,
}

impl GoodCovering {
    pub fn iota(&self) -> usize {
        self.sectors.len()
    }

    /// Bisector angle of the overlap between sector h and h+1 (cyclic).
    pub fn overlap_bisector(&self, h: usize) -> f64 {
        let n = self.sectors.len();
        let a = self.sectors[h].direction;
        let b = self.sectors[(h + 1) % n].direction;
        // midpoint along the short way from a to b
        normalize_angle(a + 0.5 * normalize_angle(b - a))
    }

    /// Count how many sectors contain the direction `theta` (at radius where all live).
    pub fn multiplicity(&self, theta: f64) -> usize {
        self.sectors
            .iter()
            .filter(|s| arg_distance(theta, s.direction) < s.half_opening)
            .count()
    }
}

/// Build a good covering with `iota` equal openings and equal overlaps.
///
/// Layout: centers at 2*pi*h/iota, opening o chosen as
/// max(1.1 * 2pi/iota, 1.05 * min_opening, constraint floor). Feasibility for
/// the equalized layout is exact: coverage with positive consecutive overlap
/// needs o > 2pi/iota, and each overlap arc must stay narrower than the
/// adjacent exclusive arcs (which also rules out triple overlaps), i.e.
/// o < 3pi/iota.
pub fn build_good_covering(
    iota: usize,
    min_opening: f64,
    kind: CoveringKind,
    lambda2k2: u32,
) -> Result<GoodCovering> {
    if iota < 2 {
        return Err(Error::InfeasibleCovering {
            iota,
            min_opening,
            reason: "need at least two sectors".into(),
        });
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let base = two_pi / iota as f64;
    let mut opening = 1.1 * base;
    if min_opening > 0.0 {
        opening = opening.max(1.05 * min_opening);
    }
    if kind == CoveringKind::OpeningConstrained {
        let floor = std::f64::consts::PI / lambda2k2 as f64;
        opening = opening.max(1.05 * floor);
    }
    let limit = 1.5 * base;
    if opening >= limit {
        return Err(Error::InfeasibleCovering {
            iota,
            min_opening,
            reason: format!(
                "equalized opening {opening:.4} reaches {limit:.4}; overlap arcs would not stay \
                 smaller than the exclusive arcs (triple-overlap margin fails)"
            ),
        });
    }
    let sectors = (0..iota)
        .map(|h| Sector {
            direction: normalize_angle(two_pi * h as f64 / iota as f64),
            half_opening: 0.5 * opening,
            radius: None, // vertex-0 sectors of radius eps0 live in the eps plane; radius applied by callers
            inner_radius: 0.0,
        })
        .collect();
    Ok(GoodCovering { sectors, kind })
}

/// Independent membership-based check of the covering axioms by sampling
/// `n_angles` directions: coverage everywhere, multiplicity in {1, 2}, and
/// (for opening-constrained coverings) the opening floor.
pub fn check_covering(
    cov: &GoodCovering,
    n_angles: usize,
    lambda2k2: u32,
) -> std::result::Result<(), String> {
    let n = cov.sectors.len();
    if n < 2 {
        return Err("fewer than two sectors".into());
    }
    for h in 0..n {
        let a = &cov.sectors[h];
        let b = &cov.sectors[(h + 1) % n];
        let gap = arg_distance(a.direction, b.direction);
        if gap >= a.half_opening + b.half_opening {
            return Err(format!("sectors {h} and {} do not overlap", (h + 1) % n));
        }
    }
    for i in 0..n_angles {
        let theta = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * (i as f64 + 0.5) / n_angles as f64;
        let mult = cov.multiplicity(theta);
        if mult == 0 {
            return Err(format!("direction {theta:.5} not covered"));
        }
        if mult > 2 {
            return Err(format!("direction {theta:.5} covered {mult} times"));
        }
    }
    if cov.kind == CoveringKind::OpeningConstrained {
        let floor = std::f64::consts::PI / lambda2k2 as f64;
        for (h, s) in cov.sectors.iter().enumerate() {
            if s.opening() <= floor {
                return Err(format!("sector {h} opening {:.5} below pi/(lambda2 k2) = {floor:.5}", s.opening()));
            }
        }
    }
    Ok(())
}

/// A finite union of angular intervals on the circle, used to intersect
/// cone conditions with Borel sectors when selecting integration directions.
#[derive(Debug, Clone, Default)]
pub struct AngleWindows {
    /// Intervals (lo, hi) with hi > lo, lengths < 2*pi; not normalized.
    pub intervals: Vec<(f64, f64)>,
}

impl AngleWindows {
    pub fn full_circle() -> Self {
        AngleWindows { intervals: vec![(-std::f64::consts::PI, std::f64::consts::PI)] }
    }

    /// Feasible xi for cos(k*(xi - center)) > sin(delta), i.e.
    /// k*(xi - center) in (-pi/2 + delta, pi/2 - delta) mod 2*pi.
    pub fn from_cone(k: u32, center: f64, delta: f64) -> Self {
        let half = (0.5 * std::f64::consts::PI - delta) / k as f64;
        let mut intervals = Vec::with_capacity(k as usize);
        for j in 0..k {
            let c = center + 2.0 * std::f64::consts::PI * j as f64 / k as f64;
            intervals.push((c - half, c + half));
        }
        AngleWindows { intervals }
    }

    pub fn from_sector(s: &Sector) -> Self {
        let (lo, hi) = s.angular_interval();
        AngleWindows { intervals: vec![(lo, hi)] }
    }

    /// Intersection of two unions of circular intervals.
    pub fn intersect(&self, other: &AngleWindows) -> AngleWindows {
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut out = Vec::new();
        for &(a0, a1) in &self.intervals {
            for &(b0, b1) in &other.intervals {
                // slide b by multiples of 2*pi to catch every circular overlap
                for shift in [-two_pi, 0.0, two_pi, 2.0 * two_pi, -2.0 * two_pi] {
                    let lo = a0.max(b0 + shift);
                    let hi = a1.min(b1 + shift);
                    if hi > lo + 1e-12 {
                        out.push((lo, hi));
                    }
                }
            }
        }
        AngleWindows { intervals: out }
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Widest interval, if any.
    pub fn widest(&self) -> Option<(f64, f64)> {
        self.intervals
            .iter()
            .copied()
            .max_by(|x, y| (x.1 - x.0).partial_cmp(&(y.1 - y.0)).unwrap())
    }

    /// Half-width of the widest interval (a feasibility margin), or negative infinity.
    pub fn margin(&self) -> f64 {
        self.widest().map(|(lo, hi)| 0.5 * (hi - lo)).unwrap_or(f64::NEG_INFINITY)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_lands_in_half_open_interval() {
        assert!((normalize_angle(3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert!((normalize_angle(-std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert!(normalize_angle(7.0).abs() < std::f64::consts::PI + 1e-12);
    }

    #[test]
    fn sector_membership_is_strict() {
        let s = Sector::bounded(0.0, 0.5, 2.0);
        assert!(s.contains(0.49, 1.0));
        assert!(!s.contains(0.5, 1.0));
        assert!(!s.contains(0.0, 2.0));
        assert!(!s.contains(0.0, 0.0));
    }

    #[test]
    fn plain_covering_iota_4() {
        let cov = build_good_covering(4, 0.0, CoveringKind::Plain, 10).unwrap();
        assert_eq!(cov.iota(), 4);
        // openings slightly over pi/2
        assert!(cov.sectors[0].opening() > std::f64::consts::FRAC_PI_2);
        assert!(check_covering(&cov, 10_000, 10).is_ok());
    }

    #[test]
    fn opening_constrained_iota_3() {
        let cov = build_good_covering(3, 0.0, CoveringKind::OpeningConstrained, 10).unwrap();
        for s in &cov.sectors {
            assert!(s.opening() > std::f64::consts::PI / 10.0);
        }
        assert!(check_covering(&cov, 10_000, 10).is_ok());
    }

    #[test]
    fn infeasible_request_errors() {
        let err = build_good_covering(2, 1.9 * std::f64::consts::PI, CoveringKind::Plain, 10);
        assert!(matches!(err, Err(Error::InfeasibleCovering { .. })));
    }

    #[test]
    fn cone_windows_intersect_across_wrap() {
        let a = AngleWindows::from_cone(2, 0.0, 0.1);
        let b = AngleWindows::from_cone(5, 0.1, 0.1);
        let c = a.intersect(&b);
        assert!(!c.is_empty());
        // every point of the intersection satisfies both cosine conditions
        for &(lo, hi) in &c.intervals {
            let mid = 0.5 * (lo + hi);
            assert!((2.0 * mid).cos() > 0.1f64.sin());
            assert!((5.0 * (mid - 0.1)).cos() > 0.1f64.sin());
        }
    }
}
