//! Closed convex constraint sets and Euclidean projection onto them.
//!
//! Boxes and balls project in closed form. Polyhedra `{x : Ax <= b}` and composite
//! intersections are projected with Dykstra's algorithm over their factors.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VviError};
use crate::linalg::{dist, dot, norm};

pub const DEFAULT_PROJ_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_CYCLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub enum ConvexSet {
    WholeSpace(usize),
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Polyhedron {
        a: DMatrix<f64>,
        b: Vec<f64>,
    },
    /// Intersection of convex sets; projected by Dykstra over the parts.
    Intersection(Vec<ConvexSet>),
}

impl ConvexSet {
    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<ConvexSet> {
        if lower.len() != upper.len() {
            return Err(VviError::Dimension {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(VviError::InvalidSet("box requires lower <= upper".into()));
        }
        Ok(ConvexSet::Box { lower, upper })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<ConvexSet> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(VviError::InvalidSet(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        Ok(ConvexSet::Ball { center, radius })
    }

    /// `{x : Ax <= b}`. Nonemptiness is checked by projecting the origin.
    pub fn polyhedron(a: DMatrix<f64>, b: Vec<f64>) -> Result<ConvexSet> {
        if a.nrows() == 0 {
            return Err(VviError::InvalidSet("polyhedron needs at least one inequality".into()));
        }
        if a.nrows() != b.len() {
            return Err(VviError::Dimension {
                expected: a.nrows(),
                got: b.len(),
            });
        }
        for (i, row) in a.row_iter().enumerate() {
            if row.iter().all(|v| *v == 0.0) && b[i] < 0.0 {
                return Err(VviError::InvalidSet(format!("row {i} is infeasible (0 <= {})", b[i])));
            }
        }
        let set = ConvexSet::Polyhedron { a, b };
        let p = set
            .project(&vec![0.0; set.dim()])
            .map_err(|_| VviError::InvalidSet("polyhedron appears empty (projection failed)".into()))?;
        if !set.contains(&p, 1e-6) {
            return Err(VviError::InvalidSet("polyhedron appears empty".into()));
        }
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::WholeSpace(n) => *n,
            ConvexSet::Box { lower, .. } => lower.len(),
            ConvexSet::Ball { center, .. } => center.len(),
            ConvexSet::Polyhedron { a, .. } => a.ncols(),
            ConvexSet::Intersection(parts) => parts.first().map_or(0, ConvexSet::dim),
        }
    }

    /// Whether the set is a finite intersection of closed half-spaces.
    pub fn is_polyhedral(&self) -> bool {
        match self {
            ConvexSet::WholeSpace(_) | ConvexSet::Box { .. } | ConvexSet::Polyhedron { .. } => true,
            ConvexSet::Ball { .. } => false,
            ConvexSet::Intersection(parts) => parts.iter().all(ConvexSet::is_polyhedral),
        }
    }

    pub fn is_bounded(&self) -> bool {
        match self {
            ConvexSet::WholeSpace(_) => false,
            ConvexSet::Box { lower, upper } => lower.iter().chain(upper).all(|v| v.is_finite()),
            ConvexSet::Ball { .. } => true,
            // conservative: only reported bounded when a bounded factor exists
            ConvexSet::Polyhedron { .. } => false,
            ConvexSet::Intersection(parts) => parts.iter().any(ConvexSet::is_bounded),
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self {
            ConvexSet::WholeSpace(_) => true,
            ConvexSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol),
            ConvexSet::Ball { center, radius } => dist(x, center) <= radius + tol,
            ConvexSet::Polyhedron { a, b } => a
                .row_iter()
                .zip(b)
                .all(|(row, bi)| row.iter().zip(x).map(|(r, v)| r * v).sum::<f64>() <= bi + tol),
            ConvexSet::Intersection(parts) => parts.iter().all(|p| p.contains(x, tol)),
        }
    }

    pub fn project(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.project_with(z, DEFAULT_PROJ_TOL, DEFAULT_MAX_CYCLES)
    }

    /// Projection with explicit Dykstra stopping parameters (ignored by closed forms).
    pub fn project_with(&self, z: &[f64], tol: f64, max_cycles: usize) -> Result<Vec<f64>> {
        if z.len() != self.dim() {
            return Err(VviError::Dimension {
                expected: self.dim(),
                got: z.len(),
            });
        }
        match self {
            ConvexSet::WholeSpace(_) => Ok(z.to_vec()),
            ConvexSet::Box { lower, upper } => Ok(z
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (l, u))| v.max(*l).min(*u))
                .collect()),
            ConvexSet::Ball { center, radius } => {
                let d = dist(z, center);
                if d <= *radius {
                    Ok(z.to_vec())
                } else {
                    let s = radius / d;
                    Ok(z.iter().zip(center).map(|(v, c)| c + s * (v - c)).collect())
                }
            }
            ConvexSet::Polyhedron { a, b } => {
                let halfspaces: Vec<HalfSpace> = a
                    .row_iter()
                    .zip(b)
                    .map(|(row, bi)| HalfSpace::new(row.iter().copied().collect(), *bi))
                    .collect();
                if halfspaces.iter().all(|h| h.contains(z)) {
                    return Ok(z.to_vec());
                }
                dykstra(z, &halfspaces, |h, y| Ok(h.project(y)), tol, max_cycles)
            }
            ConvexSet::Intersection(parts) => {
                if parts.iter().all(|p| p.contains(z, 0.0)) {
                    return Ok(z.to_vec());
                }
                dykstra(z, parts, |p, y| p.project_with(y, tol, max_cycles), tol, max_cycles)
            }
        }
    }

    /// `K ∩ Ball(0, radius)`, simplified when one factor contains the other.
    pub fn intersect_ball(&self, radius: f64) -> Result<ConvexSet> {
        if !(radius > 0.0) {
            return Err(VviError::InvalidArgument(format!(
                "radius must be positive, got {radius}"
            )));
        }
        let n = self.dim();
        let ball = ConvexSet::ball(vec![0.0; n], radius)?;
        match self {
            ConvexSet::WholeSpace(_) => Ok(ball),
            ConvexSet::Ball { center, radius: r } => {
                let d = norm(center);
                if d + r <= radius {
                    Ok(self.clone())
                } else if d + radius <= *r {
                    Ok(ball)
                } else {
                    Ok(ConvexSet::Intersection(vec![self.clone(), ball]))
                }
            }
            ConvexSet::Box { lower, upper } if self.is_bounded() => {
                // farthest corner from the origin, coordinatewise
                let far: f64 = lower
                    .iter()
                    .zip(upper)
                    .map(|(l, u)| l.abs().max(u.abs()).powi(2))
                    .sum::<f64>()
                    .sqrt();
                if far <= radius {
                    Ok(self.clone())
                } else {
                    Ok(ConvexSet::Intersection(vec![self.clone(), ball]))
                }
            }
            ConvexSet::Intersection(parts) => {
                let mut parts = parts.clone();
                parts.push(ball);
                Ok(ConvexSet::Intersection(parts))
            }
            _ => Ok(ConvexSet::Intersection(vec![self.clone(), ball])),
        }
    }
}

#[derive(Debug, Clone)]
struct HalfSpace {
    normal: Vec<f64>,
    offset: f64,
    norm_sq: f64,
}

impl HalfSpace {
    fn new(normal: Vec<f64>, offset: f64) -> HalfSpace {
        let norm_sq = dot(&normal, &normal);
        HalfSpace {
            normal,
            offset,
            norm_sq,
        }
    }

    fn contains(&self, z: &[f64]) -> bool {
        dot(&self.normal, z) <= self.offset
    }

    fn project(&self, z: &[f64]) -> Vec<f64> {
        let excess = dot(&self.normal, z) - self.offset;
        if excess <= 0.0 || self.norm_sq == 0.0 {
            return z.to_vec();
        }
        let s = excess / self.norm_sq;
        z.iter().zip(&self.normal).map(|(v, a)| v - s * a).collect()
    }
}

/// Dykstra's alternating projection onto the intersection of `parts`.
///
/// Stops when a full cycle moves neither the iterate nor any correction term by
/// more than `tol` (squared sum), which avoids the premature stop a pure
/// iterate-change test can hit.
fn dykstra<T, P>(z: &[f64], parts: &[T], project: P, tol: f64, max_cycles: usize) -> Result<Vec<f64>>
where
    P: Fn(&T, &[f64]) -> Result<Vec<f64>>,
{
    let n = z.len();
    let mut x = z.to_vec();
    let mut corrections = vec![vec![0.0; n]; parts.len()];
    let mut increment = f64::INFINITY;
    for _cycle in 0..max_cycles {
        let mut change = 0.0;
        let start = x.clone();
        for (part, corr) in parts.iter().zip(corrections.iter_mut()) {
            let y: Vec<f64> = x.iter().zip(corr.iter()).map(|(a, c)| a + c).collect();
            let p = project(part, &y)?;
            for i in 0..n {
                let nc = y[i] - p[i];
                change += (nc - corr[i]) * (nc - corr[i]);
                corr[i] = nc;
            }
            x = p;
        }
        let step = dist(&start, &x);
        increment = (change + step * step).sqrt();
        if increment < tol {
            return Ok(x);
        }
    }
    Err(VviError::ProjectionNotConverged {
        cycles: max_cycles,
        increment,
    })
}

/// Serialized constraint set as it appears in problem files. Infinite box
/// bounds are written as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SetSpec {
    WholeSpace {
        n: usize,
    },
    Box {
        lower: Vec<Option<f64>>,
        upper: Vec<Option<f64>>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Polyhedron {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
    },
}

impl SetSpec {
    pub fn build(&self) -> Result<ConvexSet> {
        match self {
            SetSpec::WholeSpace { n } => Ok(ConvexSet::WholeSpace(*n)),
            SetSpec::Box { lower, upper } => ConvexSet::boxed(
                lower.iter().map(|v| v.unwrap_or(f64::NEG_INFINITY)).collect(),
                upper.iter().map(|v| v.unwrap_or(f64::INFINITY)).collect(),
            ),
            SetSpec::Ball { center, radius } => ConvexSet::ball(center.clone(), *radius),
            SetSpec::Polyhedron { a, b } => {
                let k = a.len();
                let n = a.first().map_or(0, Vec::len);
                if a.iter().any(|r| r.len() != n) {
                    return Err(VviError::InvalidSet("ragged polyhedron matrix".into()));
                }
                let flat: Vec<f64> = a.iter().flatten().copied().collect();
                ConvexSet::polyhedron(DMatrix::from_row_slice(k, n, &flat), b.clone())
            }
        }
    }

    pub fn from_set(set: &ConvexSet) -> Result<SetSpec> {
        let finite = |v: &f64| v.is_finite().then_some(*v);
        Ok(match set {
            ConvexSet::WholeSpace(n) => SetSpec::WholeSpace { n: *n },
            ConvexSet::Box { lower, upper } => SetSpec::Box {
                lower: lower.iter().map(finite).collect(),
                upper: upper.iter().map(finite).collect(),
            },
            ConvexSet::Ball { center, radius } => SetSpec::Ball {
                center: center.clone(),
                radius: *radius,
            },
            ConvexSet::Polyhedron { a, b } => SetSpec::Polyhedron {
                a: a.row_iter().map(|r| r.iter().copied().collect()).collect(),
                b: b.clone(),
            },
            ConvexSet::Intersection(_) => {
                return Err(VviError::InvalidSet("composite sets are not serializable".into()))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sub;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        dist(a, b) <= tol
    }

    fn triangle() -> ConvexSet {
        // x1 + x2 <= 1, x >= 0
        ConvexSet::polyhedron(
            DMatrix::from_row_slice(3, 2, &[1.0, 1.0, -1.0, 0.0, 0.0, -1.0]),
            vec![1.0, 0.0, 0.0],
        )
        .unwrap()
    }

    #[test]
    fn closed_form_projections() {
        let w = ConvexSet::WholeSpace(2);
        assert_eq!(w.project(&[3.0, -4.0]).unwrap(), vec![3.0, -4.0]);
        let b = ConvexSet::ball(vec![0.0, 0.0], 1.0).unwrap();
        assert_eq!(b.project(&[2.0, 0.0]).unwrap(), vec![1.0, 0.0]);
        let bx = ConvexSet::boxed(vec![0.0, f64::NEG_INFINITY], vec![1.0, 2.0]).unwrap();
        assert_eq!(bx.project(&[-1.0, -1e300]).unwrap(), vec![0.0, -1e300]);
    }

    #[test]
    fn triangle_projection() {
        // KKT by hand: active constraint x1 + x2 = 1 with multiplier 1/2.
        let p = triangle().project(&[1.0, 1.0]).unwrap();
        assert!(close(&p, &[0.5, 0.5], 1e-10), "{p:?}");
        let p = triangle().project(&[-1.0, -3.0]).unwrap();
        assert!(close(&p, &[0.0, 0.0], 1e-10), "{p:?}");
    }

    #[test]
    fn contains_tolerances() {
        let bx = ConvexSet::boxed(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert!(bx.contains(&[0.5, 0.5], 0.0));
        let b = ConvexSet::ball(vec![0.0, 0.0], 1.0).unwrap();
        assert!(!b.contains(&[1.0 + 1e-6, 0.0], 1e-9));
        let h = ConvexSet::polyhedron(DMatrix::from_row_slice(1, 2, &[1.0, 0.0]), vec![0.0]).unwrap();
        assert!(h.contains(&[1e-12, 0.0], 1e-9));
    }

    #[test]
    fn invalid_sets() {
        assert!(ConvexSet::boxed(vec![1.0], vec![0.0]).is_err());
        assert!(ConvexSet::ball(vec![0.0], 0.0).is_err());
        assert!(ConvexSet::polyhedron(DMatrix::zeros(0, 2), vec![]).is_err());
        // x <= -1 and -x <= -1 (x >= 1): empty
        let empty = ConvexSet::polyhedron(DMatrix::from_row_slice(2, 1, &[1.0, -1.0]), vec![-1.0, -1.0]);
        assert!(empty.is_err());
    }

    #[test]
    fn polyhedral_flags() {
        assert!(ConvexSet::WholeSpace(2).is_polyhedral());
        assert!(triangle().is_polyhedral());
        assert!(ConvexSet::boxed(vec![0.0], vec![1.0]).unwrap().is_polyhedral());
        assert!(!ConvexSet::ball(vec![0.0], 1.0).unwrap().is_polyhedral());
        assert!(!triangle().intersect_ball(5.0).unwrap().is_polyhedral());
    }

    #[test]
    fn intersect_ball_simplifies() {
        assert_eq!(
            ConvexSet::WholeSpace(2).intersect_ball(3.0).unwrap(),
            ConvexSet::Ball {
                center: vec![0.0, 0.0],
                radius: 3.0
            }
        );
        let unit = ConvexSet::ball(vec![0.0, 0.0], 1.0).unwrap();
        assert_eq!(unit.intersect_ball(2.0).unwrap(), unit);
        assert!(ConvexSet::WholeSpace(2).intersect_ball(0.0).is_err());
        let bx = ConvexSet::boxed(vec![-1.0; 3], vec![1.0; 3]).unwrap();
        assert_eq!(bx.intersect_ball(10.0).unwrap(), bx);
        assert!(matches!(bx.intersect_ball(1.0).unwrap(), ConvexSet::Intersection(_)));
    }

    #[test]
    fn half_plane_box_with_ball() {
        // [0, inf) x R intersected with the unit ball
        let k = ConvexSet::boxed(vec![0.0, f64::NEG_INFINITY], vec![f64::INFINITY, f64::INFINITY])
            .unwrap()
            .intersect_ball(1.0)
            .unwrap();
        let p = k.project(&[-1.0, 0.0]).unwrap();
        assert!(close(&p, &[0.0, 0.0], 1e-10), "{p:?}");
        let p = k.project(&[-1.0, 2.0]).unwrap();
        assert!(close(&p, &[0.0, 1.0], 1e-9), "{p:?}");
    }

    fn check_projection_properties(set: &ConvexSet, seed: u64) {
        let n = set.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rand_pt = |s: f64| -> Vec<f64> { (0..n).map(|_| rng.random_range(-s..s)).collect() };
        for _ in 0..100 {
            let z1 = rand_pt(4.0);
            let z2 = rand_pt(4.0);
            let p1 = set.project(&z1).unwrap();
            let p2 = set.project(&z2).unwrap();
            let pp = set.project(&p1).unwrap();
            assert!(dist(&pp, &p1) <= 1e-10, "idempotence");
            assert!(dist(&p1, &p2) <= dist(&z1, &z2) + 1e-10, "nonexpansive");
            assert!(set.contains(&p1, 1e-8), "membership");
            let y = set.project(&rand_pt(4.0)).unwrap();
            let v = dot(&sub(&z1, &p1), &sub(&y, &p1));
            assert!(v <= 1e-10, "projection inequality {v}");
        }
    }

    #[test]
    fn projection_properties_on_all_variants() {
        check_projection_properties(&ConvexSet::WholeSpace(3), 1);
        check_projection_properties(
            &ConvexSet::boxed(vec![-1.0, 0.0, f64::NEG_INFINITY], vec![1.0, 0.5, 2.0]).unwrap(),
            2,
        );
        check_projection_properties(&ConvexSet::ball(vec![0.5, -0.5, 1.0], 1.5).unwrap(), 3);
        check_projection_properties(&triangle(), 4);
        check_projection_properties(&triangle().intersect_ball(0.8).unwrap(), 5);
    }
}
