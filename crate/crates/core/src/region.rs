//! The feasible region of (tpp, fdp) pairs: membership, case classification
//! and the closed boundary polygon.

use serde::{Deserialize, Serialize};

use crate::boundaries::{
    boundary_curve, l1_value, l2_value, q_star, transition_for, BoundaryCurve, DtTransition,
};
use crate::error::{Error, Result};
use crate::state_evolution::ProblemShape;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub tpp: f64,
    pub fdp: f64,
}

impl TradeoffPoint {
    pub fn new(tpp: f64, fdp: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&tpp) || !(0.0..=1.0).contains(&fdp) {
            return Err(Error::domain(format!("({tpp}, {fdp}) is not in the unit square")));
        }
        Ok(TradeoffPoint { tpp, fdp })
    }

    pub fn distance(&self, other: &TradeoffPoint) -> f64 {
        (self.tpp - other.tpp).hypot(self.fdp - other.fdp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiagramCase {
    /// `δ ≥ 1`: only `l1` bounds the region from above.
    Case1,
    /// `δ < 1`, `ε ≤ ε⋆`: `l1` and `l2` both active, `l2` stays above `q⋆`.
    Case2,
    /// `δ < 1`, `ε > ε⋆`: `l2` meets `q⋆` at the power ceiling `u⋆`.
    Case3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundarySegment {
    LowerCurve,
    L1,
    L2,
    FullPower,
    ZeroPower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseInfo {
    pub case: DiagramCase,
    pub active: Vec<BoundarySegment>,
    pub dt: Option<DtTransition>,
    pub u_star: f64,
}

pub fn classify_case(shape: ProblemShape) -> Result<CaseInfo> {
    use BoundarySegment::*;
    let dt = transition_for(shape)?;
    let (case, active, u_star) = match dt {
        None => (DiagramCase::Case1, vec![LowerCurve, FullPower, L1, ZeroPower], 1.0),
        Some(dt) if shape.epsilon <= dt.epsilon_star => (
            DiagramCase::Case2,
            vec![LowerCurve, FullPower, L2, L1, ZeroPower],
            1.0,
        ),
        Some(dt) => (
            DiagramCase::Case3,
            vec![LowerCurve, L2, L1, ZeroPower],
            crate::boundaries::u_prime(shape, dt.epsilon_star),
        ),
    };
    Ok(CaseInfo {
        case,
        active,
        dt,
        u_star,
    })
}

/// Which of the four defining constraints hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    /// `0 ≤ tpp ≤ 1`
    pub power_range: bool,
    /// `0 ≤ fdp ≤ 1 − ε`
    pub random_guess: bool,
    /// `fdp ≥ q⋆(tpp)`
    pub lower_boundary: bool,
    /// `(ε/δ)·tpp + fdp ≤ 1`
    pub discoveries: bool,
}

impl ConstraintCheck {
    pub fn all(&self) -> bool {
        self.power_range && self.random_guess && self.lower_boundary && self.discoveries
    }
}

/// Membership oracle for one shape, caching the power ceiling.
#[derive(Debug, Clone)]
pub struct FeasibleRegion {
    shape: ProblemShape,
    ceiling: f64,
}

impl FeasibleRegion {
    pub fn new(shape: ProblemShape) -> Result<Self> {
        let ceiling = classify_case(shape)?.u_star;
        Ok(FeasibleRegion { shape, ceiling })
    }

    pub fn shape(&self) -> ProblemShape {
        self.shape
    }

    pub fn ceiling(&self) -> f64 {
        self.ceiling
    }

    /// `q⋆` on `[0, 1]`, held at `q⋆(u⋆)` past the ceiling.
    pub fn lower_bound(&self, tpp: f64) -> Result<f64> {
        let u = tpp.clamp(0.0, self.ceiling);
        q_star(u, self.shape)
    }

    pub fn check(&self, point: TradeoffPoint, slack: f64) -> Result<ConstraintCheck> {
        if !(slack >= 0.0) {
            return Err(Error::domain(format!("slack must be nonnegative, got {slack}")));
        }
        let TradeoffPoint { tpp, fdp } = point;
        let s = self.shape;
        Ok(ConstraintCheck {
            power_range: tpp >= -slack && tpp <= 1.0 + slack,
            random_guess: fdp >= -slack && fdp <= l1_value(s) + slack,
            lower_boundary: fdp >= self.lower_bound(tpp)? - slack,
            discoveries: s.epsilon / s.delta * tpp + fdp <= 1.0 + slack,
        })
    }

    pub fn contains(&self, point: TradeoffPoint, slack: f64) -> Result<bool> {
        Ok(self.check(point, slack)?.all())
    }
}

pub fn contains(point: TradeoffPoint, shape: ProblemShape, slack: f64) -> Result<bool> {
    FeasibleRegion::new(shape)?.contains(point, slack)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub shape: ProblemShape,
    pub case_label: DiagramCase,
    pub dt: Option<DtTransition>,
    pub u_star: f64,
    pub lower: BoundaryCurve,
    /// Vertices after the last lower-curve sample, ending at `(0, 1 − ε)`.
    pub upper_polyline: Vec<TradeoffPoint>,
}

impl RegionSpec {
    /// Closed boundary, counterclockwise, without repeating the first vertex.
    pub fn vertices(&self) -> Vec<TradeoffPoint> {
        self.lower
            .samples
            .iter()
            .map(|&(u, q)| TradeoffPoint { tpp: u, fdp: q })
            .chain(self.upper_polyline.iter().copied())
            .collect()
    }

    /// Shoelace area; positive for counterclockwise order.
    pub fn signed_area(&self) -> f64 {
        let v = self.vertices();
        let n = v.len();
        (0..n)
            .map(|i| {
                let (a, b) = (v[i], v[(i + 1) % n]);
                a.tpp * b.fdp - b.tpp * a.fdp
            })
            .sum::<f64>()
            * 0.5
    }
}

pub fn region_polygon(shape: ProblemShape, n_samples: usize) -> Result<RegionSpec> {
    if n_samples < 16 {
        return Err(Error::domain(format!("region_polygon needs at least 16 samples, got {n_samples}")));
    }
    let info = classify_case(shape)?;
    let lower = boundary_curve(shape, n_samples)?;
    let top = l1_value(shape);
    let corner = TradeoffPoint {
        tpp: shape.delta.min(1.0),
        fdp: top,
    };
    let top_left = TradeoffPoint { tpp: 0.0, fdp: top };
    let upper_polyline = match info.case {
        DiagramCase::Case1 => vec![TradeoffPoint { tpp: 1.0, fdp: top }, top_left],
        DiagramCase::Case2 => vec![
            TradeoffPoint {
                tpp: 1.0,
                fdp: l2_value(1.0, shape),
            },
            corner,
            top_left,
        ],
        DiagramCase::Case3 => vec![corner, top_left],
    };
    Ok(RegionSpec {
        shape,
        case_label: info.case,
        dt: info.dt,
        u_star: info.u_star,
        lower,
        upper_polyline,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundaries::epsilon_star;

    fn shape(d: f64, e: f64) -> ProblemShape {
        ProblemShape::new(d, e).unwrap()
    }

    fn pt(tpp: f64, fdp: f64) -> TradeoffPoint {
        TradeoffPoint { tpp, fdp }
    }

    #[test]
    fn contains_examples() {
        assert!(!contains(pt(0.5, 0.9), shape(1.0, 0.3), 0.0).unwrap());
        for (d, e) in [(1.0, 0.3), (0.5, 0.3), (0.85, 0.8)] {
            assert!(contains(pt(0.0, 0.0), shape(d, e), 0.0).unwrap());
        }
        // (ε/δ)·1 + 0.5 = 1.088 > 1
        let check = FeasibleRegion::new(shape(0.85, 0.5)).unwrap().check(pt(1.0, 0.5), 0.0).unwrap();
        assert!(!check.discoveries);
        assert!(!check.all());
        assert!(contains(pt(0.5, 0.9), shape(1.0, 0.3), 0.25).unwrap());
        assert!(contains(pt(0.0, 0.0), shape(1.0, 0.3), -1.0).is_err());
    }

    #[test]
    fn cases_match_the_sparsity_03_diagrams() {
        assert_eq!(classify_case(shape(1.0, 0.3)).unwrap().case, DiagramCase::Case1);
        assert_eq!(classify_case(shape(0.7, 0.3)).unwrap().case, DiagramCase::Case2);
        assert_eq!(classify_case(shape(0.5, 0.3)).unwrap().case, DiagramCase::Case3);
        let c3 = classify_case(shape(0.5, 0.3)).unwrap();
        assert!(c3.active.contains(&BoundarySegment::L2));
        assert!(!c3.active.contains(&BoundarySegment::FullPower));
        let c1 = classify_case(shape(1.0, 0.3)).unwrap();
        assert!(!c1.active.contains(&BoundarySegment::L2));
    }

    #[test]
    fn classification_stable_under_tiny_perturbations() {
        for d in [0.3, 0.5, 0.7, 0.9, 1.0, 1.4] {
            let es = if d < 1.0 { epsilon_star(d).unwrap().epsilon_star } else { f64::NAN };
            for i in 1..40 {
                let e = i as f64 / 40.0;
                if (e - es).abs() < 1e-9 {
                    continue;
                }
                let base = classify_case(shape(d, e)).unwrap().case;
                for bump in [-1e-12, 1e-12] {
                    assert_eq!(classify_case(shape(d, e + bump)).unwrap().case, base);
                }
            }
        }
    }

    fn segments_cross(a: TradeoffPoint, b: TradeoffPoint, c: TradeoffPoint, d: TradeoffPoint) -> bool {
        let orient = |p: TradeoffPoint, q: TradeoffPoint, r: TradeoffPoint| {
            (q.tpp - p.tpp) * (r.fdp - p.fdp) - (q.fdp - p.fdp) * (r.tpp - p.tpp)
        };
        let (o1, o2) = (orient(a, b, c), orient(a, b, d));
        let (o3, o4) = (orient(c, d, a), orient(c, d, b));
        o1 * o2 < 0.0 && o3 * o4 < 0.0
    }

    #[test]
    fn polygons_are_simple_and_counterclockwise() {
        for (d, e) in [(1.0, 0.3), (0.7, 0.3), (0.5, 0.3), (0.85, 0.8), (0.85, 0.5), (2.0, 0.6)] {
            let s = shape(d, e);
            let region = region_polygon(s, 64).unwrap();
            assert!(region.signed_area() > 0.0);
            let v = region.vertices();
            let n = v.len();
            for i in 0..n {
                for j in i + 2..n {
                    if i == 0 && j == n - 1 {
                        continue;
                    }
                    assert!(
                        !segments_cross(v[i], v[i + 1], v[j], v[(j + 1) % n]),
                        "({d},{e}) edges {i} and {j} cross"
                    );
                }
            }
            let feasible = FeasibleRegion::new(s).unwrap();
            for &(u, q) in &region.lower.samples {
                assert!(feasible.contains(pt(u, q), 1e-9).unwrap(), "({d},{e}) at u={u}");
            }
        }
    }

    #[test]
    fn polygon_case_structure() {
        let c1 = region_polygon(shape(1.0, 0.3), 32).unwrap();
        assert_eq!(c1.upper_polyline, vec![pt(1.0, 0.7), pt(0.0, 0.7)]);

        let s3 = shape(0.5, 0.3);
        let c3 = region_polygon(s3, 32).unwrap();
        let last = *c3.lower.samples.last().unwrap();
        assert_eq!(last.0, c3.u_star);
        assert!((last.1 - l2_value(c3.u_star, s3)).abs() < 1e-6);
        let rightmost = c3.vertices().iter().map(|v| v.tpp).fold(0.0, f64::max);
        assert_eq!(rightmost, c3.u_star);

        assert!(region_polygon(s3, 8).is_err());
    }
}
