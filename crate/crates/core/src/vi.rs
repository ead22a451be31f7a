//! Scalarization of the vector problem and an extragradient solver for the
//! resulting scalar variational inequality `VI(F_ξ, K)`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, VviError};
use crate::expr::VectorField;
use crate::geometry::ConvexSet;
use crate::linalg::{dist, is_finite, norm, sub_scaled};
use crate::problem::VviProblem;

/// A point of the unit simplex `Δ`, tagged with whether it lies in `ri Δ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexWeight {
    weights: Vec<f64>,
    interior: bool,
}

impl SimplexWeight {
    pub fn new(weights: Vec<f64>) -> Result<SimplexWeight> {
        if weights.is_empty() {
            return Err(VviError::InvalidWeight("empty weight vector".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(VviError::InvalidWeight(format!(
                "weights must be nonnegative: {weights:?}"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(VviError::InvalidWeight(format!("weights sum to {total}, not 1")));
        }
        let interior = weights.iter().all(|w| *w > 0.0);
        Ok(SimplexWeight { weights, interior })
    }

    /// The vertex `e_l` of the `m`-simplex.
    pub fn vertex(m: usize, l: usize) -> SimplexWeight {
        let mut w = vec![0.0; m];
        w[l] = 1.0;
        SimplexWeight {
            weights: w,
            interior: m == 1,
        }
    }

    /// Parses a comma-separated list such as `0.5,0.5`.
    pub fn parse(text: &str) -> Result<SimplexWeight> {
        let weights = text
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| VviError::InvalidWeight(format!("cannot parse `{t}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        SimplexWeight::new(weights)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn is_interior(&self) -> bool {
        self.interior
    }

    /// `(1 - t) self + t other`, renormalized against rounding.
    pub fn lerp(&self, other: &SimplexWeight, t: f64) -> SimplexWeight {
        if t == 1.0 {
            return other.clone();
        }
        if t == 0.0 {
            return self.clone();
        }
        let mut w: Vec<f64> = self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| ((1.0 - t) * a + t * b).max(0.0))
            .collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
        let interior = w.iter().all(|v| *v > 0.0);
        SimplexWeight { weights: w, interior }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    Diverged,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Converged => "Converged",
            SolveStatus::MaxIterations => "MaxIterations",
            SolveStatus::Diverged => "Diverged",
        }
    }

    pub fn parse(s: &str) -> Option<SolveStatus> {
        match s {
            "Converged" => Some(SolveStatus::Converged),
            "MaxIterations" => Some(SolveStatus::MaxIterations),
            "Diverged" => Some(SolveStatus::Diverged),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRange {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub point: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    /// Smallest and largest accepted step; absent when no step was taken.
    pub steps: Option<StepRange>,
}

impl SolveOutcome {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub divergence_radius: f64,
    pub initial_step: f64,
    pub shrink: f64,
    pub growth: f64,
    /// Accept a trial step when `λ‖f(x) - f(x̄)‖ <= ratio ‖x - x̄‖`.
    pub step_ratio: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-9,
            max_iter: 200_000,
            divergence_radius: 1e8,
            initial_step: 1.0,
            shrink: 0.5,
            growth: 1.05,
            step_ratio: 0.9,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(VviError::InvalidOptions(m.to_string()));
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1");
        }
        if !(self.divergence_radius > 0.0) {
            return bad("divergence_radius must be positive");
        }
        if !(self.initial_step > 0.0) || !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad("initial_step must be positive and shrink in (0, 1)");
        }
        if !(self.growth >= 1.0) || !(self.step_ratio > 0.0 && self.step_ratio < 1.0) {
            return bad("growth must be >= 1 and step_ratio in (0, 1)");
        }
        Ok(())
    }
}

const MIN_STEP: f64 = 1e-300;
const MAX_STEP: f64 = 1e12;

/// `x ↦ Σ_l ξ_l F_l(x)`.
pub fn scalarize(problem: &VviProblem, xi: &SimplexWeight) -> Result<VectorField> {
    if xi.len() != problem.m() {
        return Err(VviError::Dimension {
            expected: problem.m(),
            got: xi.len(),
        });
    }
    VectorField::weighted_sum(xi.weights(), problem.fields())
}

/// `‖x - P_K(x - f(x))‖`; zero exactly at solutions of `VI(f, K)`.
pub fn natural_residual(f: &VectorField, set: &ConvexSet, x: &[f64]) -> Result<f64> {
    let fx = f.eval(x);
    residual_with(set, x, &fx)
}

fn residual_with(set: &ConvexSet, x: &[f64], fx: &[f64]) -> Result<f64> {
    let p = set.project(&sub_scaled(x, 1.0, fx))?;
    Ok(dist(x, &p))
}

/// Extragradient with backtracking: the trial point `x̄ = P(x - λf(x))` is
/// accepted when `λ‖f(x) - f(x̄)‖ <= ratio ‖x - x̄‖`, then `x⁺ = P(x - λf(x̄))`.
/// Accepted steps grow `λ` by `growth` so locally flat regions speed up again.
pub fn solve_vi(f: &VectorField, set: &ConvexSet, x0: &[f64], opts: &SolverOptions) -> Result<SolveOutcome> {
    opts.validate()?;
    if x0.len() != f.dim() || set.dim() != f.dim() {
        return Err(VviError::Dimension {
            expected: f.dim(),
            got: x0.len().min(set.dim()),
        });
    }
    let n = f.dim();
    let mut x = set.project(x0)?;
    let mut fx = f.eval(&x);
    let mut fbar = vec![0.0; n];
    let mut lambda = opts.initial_step;
    let mut steps: Option<StepRange> = None;
    let mut residual = f64::INFINITY;

    let diverged = |x: &[f64], fx: &[f64]| !is_finite(x) || !is_finite(fx) || norm(x) > opts.divergence_radius;

    for iter in 0..opts.max_iter {
        if diverged(&x, &fx) {
            return Ok(SolveOutcome {
                status: SolveStatus::Diverged,
                point: x,
                residual,
                iterations: iter,
                steps,
            });
        }
        residual = residual_with(set, &x, &fx)?;
        if residual <= opts.tol {
            return Ok(SolveOutcome {
                status: SolveStatus::Converged,
                point: x,
                residual,
                iterations: iter,
                steps,
            });
        }
        loop {
            let trial = set.project(&sub_scaled(&x, lambda, &fx))?;
            f.eval_into(&trial, &mut fbar);
            if lambda * dist(&fx, &fbar) <= opts.step_ratio * dist(&x, &trial) || lambda < MIN_STEP {
                break;
            }
            lambda *= opts.shrink;
        }
        x = set.project(&sub_scaled(&x, lambda, &fbar))?;
        f.eval_into(&x, &mut fx);
        steps = Some(match steps {
            None => StepRange {
                min: lambda,
                max: lambda,
            },
            Some(s) => StepRange {
                min: s.min.min(lambda),
                max: s.max.max(lambda),
            },
        });
        lambda = (lambda * opts.growth).min(MAX_STEP);
    }
    let status = if diverged(&x, &fx) {
        SolveStatus::Diverged
    } else {
        residual = residual_with(set, &x, &fx)?;
        if residual <= opts.tol {
            SolveStatus::Converged
        } else {
            SolveStatus::MaxIterations
        }
    };
    Ok(SolveOutcome {
        status,
        point: x,
        residual,
        iterations: opts.max_iter,
        steps,
    })
}
