//! Sampled checks of problem hypotheses (monotonicity, Jacobian symmetry) and
//! sampling-based falsifiers for weak-Pareto / Pareto membership.
//!
//! Nothing here is a certificate of absence: "no witness found" only means the
//! probes did not find one.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VviError};
use crate::linalg::{dot, norm, sub, symmetric_eigenvalues};
use crate::problem::VviProblem;

pub const MONOTONE_TOL: f64 = -1e-9;
pub const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneWitness {
    pub field: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub pairing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneReport {
    pub monotone_certified: bool,
    pub min_pairing: f64,
    pub min_eig: f64,
    pub witness: Option<MonotoneWitness>,
}

/// Uniform point of `[lo, hi]^n` projected onto `K`.
fn sample_in(problem: &VviProblem, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Result<Vec<f64>> {
    let z: Vec<f64> = (0..problem.n()).map(|_| rng.random_range(lo..=hi)).collect();
    problem.set.project(&z)
}

/// Samples `⟨F_l(y) - F_l(x), y - x⟩` over random pairs and the smallest
/// eigenvalue of the symmetrized Jacobian over random points, inside
/// `[lo, hi]^n ∩ K`.
pub fn check_monotone(problem: &VviProblem, samples: usize, seed: u64, region: (f64, f64)) -> Result<MonotoneReport> {
    if samples == 0 {
        return Err(VviError::InvalidArgument("samples must be at least 1".into()));
    }
    let (lo, hi) = region;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_pairing = f64::INFINITY;
    let mut witness: Option<MonotoneWitness> = None;
    for _ in 0..samples {
        let x = sample_in(problem, &mut rng, lo, hi)?;
        let y = sample_in(problem, &mut rng, lo, hi)?;
        let d = sub(&y, &x);
        for (l, f) in problem.fields().iter().enumerate() {
            let pairing = dot(&sub(&f.eval(&y), &f.eval(&x)), &d);
            if pairing < min_pairing {
                min_pairing = pairing;
                if pairing < MONOTONE_TOL {
                    witness = Some(MonotoneWitness {
                        field: l,
                        x: x.clone(),
                        y: y.clone(),
                        pairing,
                    });
                }
            }
        }
    }
    let mut min_eig = f64::INFINITY;
    for _ in 0..samples {
        let x = sample_in(problem, &mut rng, lo, hi)?;
        for f in problem.fields() {
            let eig = symmetric_eigenvalues(&f.jacobian(&x));
            min_eig = min_eig.min(eig[0]);
        }
    }
    Ok(MonotoneReport {
        monotone_certified: min_pairing >= MONOTONE_TOL && min_eig >= MONOTONE_TOL,
        min_pairing,
        min_eig,
        witness,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SymmetryClass {
    Symmetric,
    SkewSymmetric,
    Neither,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub class: SymmetryClass,
    pub max_sym_defect: f64,
    pub max_skew_defect: f64,
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// Largest entrywise `|J - Jᵀ|` and `|J + Jᵀ|` over random points of
/// `[-2, 2]^n ∩ K`. A field passing both tests has a zero Jacobian and is
/// reported as symmetric.
pub fn classify_symmetry(problem: &VviProblem, samples: usize, seed: u64) -> Result<SymmetryReport> {
    if samples == 0 {
        return Err(VviError::InvalidArgument("samples must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sym, mut skew) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let x = sample_in(problem, &mut rng, -2.0, 2.0)?;
        for f in problem.fields() {
            let j = f.jacobian(&x);
            sym = sym.max(max_abs(&(&j - j.transpose())));
            skew = skew.max(max_abs(&(&j + j.transpose())));
        }
    }
    let class = if sym <= SYMMETRY_TOL {
        SymmetryClass::Symmetric
    } else if skew <= SYMMETRY_TOL {
        SymmetryClass::SkewSymmetric
    } else {
        SymmetryClass::Neither
    };
    Ok(SymmetryReport {
        class,
        max_sym_defect: sym,
        max_skew_defect: skew,
    })
}

/// Probe configuration shared by both falsifiers.
#[derive(Debug, Clone)]
pub struct Probes<'a> {
    pub count: usize,
    pub seed: u64,
    /// Other solution points; half of the probes head toward them when non-empty.
    pub targets: &'a [Vec<f64>],
    /// Extra allowance per unit of `‖y - x‖` absorbing the solver's residual.
    pub slack: f64,
}

impl Probes<'_> {
    pub fn new(count: usize, seed: u64) -> Probes<'static> {
        Probes {
            count,
            seed,
            targets: &[],
            slack: 1e-8,
        }
    }
}

const SCALES: [f64; 3] = [1e-2, 1.0, 1e2];

fn falsify<P>(problem: &VviProblem, x: &[f64], probes: &Probes<'_>, is_witness: P) -> Result<Option<Vec<f64>>>
where
    P: Fn(&[f64], f64) -> bool,
{
    if x.len() != problem.n() {
        return Err(VviError::Dimension {
            expected: problem.n(),
            got: x.len(),
        });
    }
    if !problem.set.contains(x, 1e-6) {
        return Err(VviError::NotInSet);
    }
    let values: Vec<Vec<f64>> = problem.fields().iter().map(|f| f.eval(x)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(probes.seed);
    let mut products = vec![0.0; values.len()];
    for i in 0..probes.count {
        let z: Vec<f64> = if !probes.targets.is_empty() && i % 2 == 1 {
            let c = &probes.targets[rng.random_range(0..probes.targets.len())];
            let t: f64 = rng.random_range(0.0..=1.5);
            x.iter().zip(c).map(|(a, b)| a + t * (b - a)).collect()
        } else {
            let u: Vec<f64> = (0..x.len()).map(|_| rng.sample(StandardNormal)).collect();
            let len = norm(&u).max(f64::MIN_POSITIVE);
            let s = SCALES[(i / 2) % SCALES.len()];
            x.iter().zip(&u).map(|(a, b)| a + s * b / len).collect()
        };
        let y = problem.set.project(&z)?;
        let d = sub(&y, x);
        let step = norm(&d);
        if step == 0.0 {
            continue;
        }
        for (p, v) in products.iter_mut().zip(&values) {
            *p = dot(v, &d);
        }
        if is_witness(&products, step) {
            return Ok(Some(y));
        }
    }
    Ok(None)
}

/// Looks for `y ∈ K` with `⟨F_l(x), y - x⟩ < 0` for every criterion, i.e. a
/// direction showing `x` is not a weak Pareto solution.
pub fn falsify_weak_pareto(problem: &VviProblem, x: &[f64], probes: &Probes<'_>) -> Result<Option<Vec<f64>>> {
    let slack = probes.slack;
    falsify(problem, x, probes, |products, step| {
        let bound = -(1e-9 + slack * step);
        products.iter().all(|p| *p < bound)
    })
}

/// Looks for `y ∈ K` whose products are all nonpositive and at least one
/// negative, i.e. a direction showing `x` is not a Pareto solution.
pub fn falsify_pareto(problem: &VviProblem, x: &[f64], probes: &Probes<'_>) -> Result<Option<Vec<f64>>> {
    let slack = probes.slack;
    falsify(problem, x, probes, |products, step| {
        let upper = 1e-12 + slack * step;
        let strict = -(1e-9 + slack * step);
        products.iter().all(|p| *p <= upper) && products.iter().any(|p| *p < strict)
    })
}
