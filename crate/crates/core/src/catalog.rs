//! Built-in problems: the two cubic bicriteria examples with their closed-form
//! solution maps, a constructed affine case where weak and Pareto solutions
//! differ, and seeded random monotone affine problems.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, VviError};
use crate::expr::VectorField;
use crate::geometry::ConvexSet;
use crate::problem::VviProblem;

/// `F1 = (x1^3, x2^3 - 1)`, `F2 = (x1^3 - 1, x2^3)` on `R^2`.
pub fn example_q() -> VviProblem {
    VviProblem::new(
        "example-q",
        vec![
            VectorField::parse(2, &["x1^3", "x2^3 - 1"]).unwrap(),
            VectorField::parse(2, &["x1^3 - 1", "x2^3"]).unwrap(),
        ],
        ConvexSet::WholeSpace(2),
    )
    .unwrap()
}

/// Solution of the `ξ = (t, 1 - t)` scalarization of [`example_q`].
pub fn closed_form_q(t: f64) -> Result<[f64; 2]> {
    check_unit(t)?;
    Ok([(1.0 - t).cbrt(), t.cbrt()])
}

/// `F1 = (-x2 - 1, x1^3 - 1)`, `F2 = (x2 - 1, -x1^3 - 1)` on `R^2`.
pub fn example_p() -> VviProblem {
    VviProblem::new(
        "example-p",
        vec![
            VectorField::parse(2, &["-x2 - 1", "x1^3 - 1"]).unwrap(),
            VectorField::parse(2, &["x2 - 1", "-x1^3 - 1"]).unwrap(),
        ],
        ConvexSet::WholeSpace(2),
    )
    .unwrap()
}

/// Solution of the `ξ = (t, 1 - t)` scalarization of [`example_p`]; `None` at `t = 1/2`.
pub fn closed_form_p(t: f64) -> Result<Option<[f64; 2]>> {
    check_unit(t)?;
    let c = 2.0 * t - 1.0;
    if c == 0.0 {
        return Ok(None);
    }
    Ok(Some([1.0 / c.cbrt(), -1.0 / c]))
}

fn check_unit(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(VviError::InvalidArgument(format!("ξ1 = {t} is outside [0, 1]")));
    }
    Ok(())
}

/// Affine bicriteria problem on `R^2` whose vertex weight `(1, 0)` has a whole
/// line of weak-only solutions: `F1(x) = (x1, 0)`, `F2(x) = (x1, x2 - 1)`.
///
/// `S((1,0)) = {x1 = 0}` while the Pareto solutions sit at `x2 = 1`.
pub fn example_weak_gap() -> VviProblem {
    let f1 = VectorField::affine(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]), vec![0.0, 0.0]).unwrap();
    let f2 = VectorField::affine(DMatrix::identity(2, 2), vec![0.0, -1.0]).unwrap();
    VviProblem::new("weak-gap", vec![f1, f2], ConvexSet::WholeSpace(2)).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonotoneClass {
    /// `M = BᵀB`
    Symmetric,
    /// `M = A - Aᵀ`
    Skew,
    /// `M = BᵀB + A - Aᵀ`
    Mixed,
}

impl FromStr for MonotoneClass {
    type Err = VviError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetric" => Ok(MonotoneClass::Symmetric),
            "skew" => Ok(MonotoneClass::Skew),
            "mixed" => Ok(MonotoneClass::Mixed),
            _ => Err(VviError::UnknownProblem(format!("unknown class `{s}`"))),
        }
    }
}

impl fmt::Display for MonotoneClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MonotoneClass::Symmetric => "symmetric",
            MonotoneClass::Skew => "skew",
            MonotoneClass::Mixed => "mixed",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SetKind {
    WholeSpace,
    /// `[-h, h]^n`
    Box(f64),
    /// `{x : x_i >= -1, Σ x_i <= 1}`
    Simplex,
}

impl SetKind {
    pub fn build(&self, n: usize) -> ConvexSet {
        match self {
            SetKind::WholeSpace => ConvexSet::WholeSpace(n),
            SetKind::Box(h) => ConvexSet::boxed(vec![-h; n], vec![*h; n]).unwrap(),
            SetKind::Simplex => {
                let mut a = DMatrix::zeros(n + 1, n);
                for i in 0..n {
                    a[(i, i)] = -1.0;
                    a[(n, i)] = 1.0;
                }
                ConvexSet::polyhedron(a, vec![1.0; n + 1]).unwrap()
            }
        }
    }

    fn tag(&self) -> &'static str {
        match self {
            SetKind::WholeSpace => "whole",
            SetKind::Box(_) => "box",
            SetKind::Simplex => "simplex",
        }
    }
}

/// Random monotone affine problem; every entry is drawn uniformly from `[-1, 1]`.
pub fn random_affine_vvi(n: usize, m: usize, seed: u64, class: MonotoneClass, kind: SetKind) -> Result<VviProblem> {
    if n == 0 || m == 0 {
        return Err(VviError::InvalidArgument("n and m must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..=1.0));
    let mut fields = Vec::with_capacity(m);
    for _ in 0..m {
        let matrix = match class {
            MonotoneClass::Symmetric => {
                let b = draw(n, n);
                b.transpose() * b
            }
            MonotoneClass::Skew => {
                let a = draw(n, n);
                &a - a.transpose()
            }
            MonotoneClass::Mixed => {
                let b = draw(n, n);
                let a = draw(n, n);
                b.transpose() * b + &a - a.transpose()
            }
        };
        let q: Vec<f64> = draw(n, 1).iter().copied().collect();
        fields.push(VectorField::affine(matrix, q)?);
    }
    let name = format!("random-affine:{class}:{n}:{m}:{seed}:{}", kind.tag());
    VviProblem::new(name, fields, kind.build(n))
}

/// Resolves a catalog name: `example-q`, `example-p`, `weak-gap`, or
/// `random-affine:<class>:<n>:<m>:<seed>[:whole|box|simplex]` (box by default).
pub fn resolve(name: &str) -> Result<VviProblem> {
    match name {
        "example-q" => return Ok(example_q()),
        "example-p" => return Ok(example_p()),
        "weak-gap" => return Ok(example_weak_gap()),
        _ => {}
    }
    let unknown = || VviError::UnknownProblem(name.to_string());
    let parts: Vec<&str> = name.split(':').collect();
    if parts.first() != Some(&"random-affine") || !(5..=6).contains(&parts.len()) {
        return Err(unknown());
    }
    let class: MonotoneClass = parts[1].parse().map_err(|_| unknown())?;
    let n: usize = parts[2].parse().map_err(|_| unknown())?;
    let m: usize = parts[3].parse().map_err(|_| unknown())?;
    let seed: u64 = parts[4].parse().map_err(|_| unknown())?;
    let kind = match parts.get(5).copied() {
        None | Some("box") => SetKind::Box(1.0),
        Some("whole") => SetKind::WholeSpace,
        Some("simplex") => SetKind::Simplex,
        Some(_) => return Err(unknown()),
    };
    random_affine_vvi(n, m, seed, class, kind)
}
