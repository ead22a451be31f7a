//! Sampling the basic multifunction `S(ξ) = Sol(F_ξ, K)` over a simplex lattice.
//!
//! Converged samples over all of `Δ` estimate the weak Pareto set; those whose
//! weight is strictly positive estimate the proper Pareto set.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VviError};
use crate::linalg::dist;
use crate::par::Execution;
use crate::problem::VviProblem;
use crate::vi::{scalarize, solve_vi, SimplexWeight, SolveOutcome, SolveStatus, SolverOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionSample {
    pub xi: SimplexWeight,
    pub outcome: SolveOutcome,
    pub start_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionCloud {
    pub problem: String,
    pub samples: Vec<SolutionSample>,
    pub resolution: usize,
    pub interior_margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolutionClass {
    Weak,
    Proper,
    Pareto,
}

impl std::str::FromStr for SolutionClass {
    type Err = VviError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weak" => Ok(SolutionClass::Weak),
            "proper" => Ok(SolutionClass::Proper),
            "pareto" => Ok(SolutionClass::Pareto),
            _ => Err(VviError::InvalidArgument(format!("unknown class `{s}`"))),
        }
    }
}

/// All lattice points `k / resolution` of the `m`-simplex, lexicographic in
/// `k`. A positive `interior_margin` keeps only points with every weight at
/// least that large.
pub fn simplex_grid(m: usize, resolution: usize, interior_margin: f64) -> Result<Vec<SimplexWeight>> {
    if m == 0 {
        return Err(VviError::InvalidArgument("m must be at least 1".into()));
    }
    if resolution == 0 {
        return Err(VviError::InvalidArgument("resolution must be at least 1".into()));
    }
    if !(interior_margin >= 0.0 && interior_margin < 1.0 / m as f64) {
        return Err(VviError::InvalidArgument(format!(
            "interior margin {interior_margin} must lie in [0, 1/{m})"
        )));
    }
    let mut out = Vec::new();
    let mut counts = vec![0usize; m];
    fill(&mut counts, 0, resolution, resolution, interior_margin, &mut out);
    Ok(out)
}

fn fill(counts: &mut [usize], pos: usize, left: usize, res: usize, margin: f64, out: &mut Vec<SimplexWeight>) {
    let m = counts.len();
    if pos == m - 1 {
        counts[pos] = left;
        let w: Vec<f64> = counts.iter().map(|&k| k as f64 / res as f64).collect();
        if w.iter().all(|v| *v >= margin) {
            out.push(lattice_weight(w, counts.iter().all(|&k| k > 0)));
        }
        return;
    }
    for k in 0..=left {
        counts[pos] = k;
        fill(counts, pos + 1, left - k, res, margin, out);
    }
}

fn lattice_weight(w: Vec<f64>, interior: bool) -> SimplexWeight {
    let xi = SimplexWeight::new(w).expect("lattice point lies on the simplex");
    debug_assert_eq!(xi.is_interior(), interior);
    xi
}

#[derive(Debug, Clone, Copy)]
pub struct SweepOptions {
    pub starts: usize,
    pub seed: u64,
    pub solver: SolverOptions,
    /// Half-width of the box around the default start that random starts are drawn from.
    pub start_box: f64,
    pub dedup_tol: f64,
    pub execution: Execution,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            starts: 3,
            seed: 0,
            solver: SolverOptions::default(),
            start_box: 1.0,
            dedup_tol: 1e-6,
            execution: Execution::default(),
        }
    }
}

fn start_rng(seed: u64, index: usize, start: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((index as u64) << 20) ^ start as u64);
    rng
}

/// Solves every scalarization on the grid from `opts.starts` initial points.
///
/// Per weight, converged solutions closer than `dedup_tol` to an earlier one are
/// dropped; if no start converges a single failure sample is kept so that the
/// cloud still covers the whole grid.
pub fn sweep(problem: &VviProblem, grid: &[SimplexWeight], opts: &SweepOptions) -> Result<SolutionCloud> {
    if grid.is_empty() {
        return Err(VviError::InvalidArgument("empty grid".into()));
    }
    if opts.starts == 0 {
        return Err(VviError::InvalidArgument("starts must be at least 1".into()));
    }
    opts.solver.validate()?;
    let base = problem.set.project(&vec![0.0; problem.n()])?;
    let indexed: Vec<(usize, &SimplexWeight)> = grid.iter().enumerate().collect();
    let per_weight = opts
        .execution
        .map(&indexed, |(index, xi)| solve_weight(problem, xi, *index, &base, opts));
    let mut samples = Vec::new();
    for s in per_weight {
        samples.extend(s?);
    }
    let resolution = infer_resolution(grid).unwrap_or(0);
    let interior_margin = grid
        .iter()
        .flat_map(|w| w.weights().iter().copied())
        .fold(f64::INFINITY, f64::min);
    Ok(SolutionCloud {
        problem: problem.name.clone(),
        samples,
        resolution,
        interior_margin,
    })
}

fn solve_weight(
    problem: &VviProblem,
    xi: &SimplexWeight,
    index: usize,
    base: &[f64],
    opts: &SweepOptions,
) -> Result<Vec<SolutionSample>> {
    let field = scalarize(problem, xi)?;
    let mut kept: Vec<SolutionSample> = Vec::new();
    let mut first_failure: Option<SolutionSample> = None;
    for start in 0..opts.starts {
        let x0 = if start == 0 {
            base.to_vec()
        } else {
            let mut rng = start_rng(opts.seed, index, start);
            let z: Vec<f64> = base
                .iter()
                .map(|b| b + rng.random_range(-opts.start_box..=opts.start_box))
                .collect();
            problem.set.project(&z)?
        };
        let outcome = solve_vi(&field, &problem.set, &x0, &opts.solver)?;
        let sample = SolutionSample {
            xi: xi.clone(),
            outcome,
            start_index: start,
        };
        if sample.outcome.converged() {
            let dup = kept
                .iter()
                .any(|k| dist(&k.outcome.point, &sample.outcome.point) <= opts.dedup_tol);
            if !dup {
                kept.push(sample);
            }
        } else if first_failure.is_none() {
            first_failure = Some(sample);
        }
    }
    if kept.is_empty() {
        kept.extend(first_failure);
    }
    Ok(kept)
}

/// Smallest lattice resolution on which every weight sits, if one up to 10⁴ exists.
pub fn infer_resolution(grid: &[SimplexWeight]) -> Option<usize> {
    (1..=10_000).find(|&r| {
        grid.iter().all(|w| {
            w.weights().iter().all(|v| {
                let k = v * r as f64;
                (k - k.round()).abs() <= 1e-7
            })
        })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParetoStatus {
    /// Polyhedral `K`: the Pareto set equals the proper set.
    Exact,
    /// Pareto set lies between the proper and weak sets only.
    BracketedOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub weak: Vec<usize>,
    pub proper: Vec<usize>,
    pub pareto_status: ParetoStatus,
}

pub fn classify_samples(cloud: &SolutionCloud, polyhedral: bool) -> Classification {
    let weak: Vec<usize> = cloud
        .samples
        .iter()
        .enumerate()
        .filter(|(_, s)| s.outcome.converged())
        .map(|(i, _)| i)
        .collect();
    let proper = weak
        .iter()
        .copied()
        .filter(|&i| cloud.samples[i].xi.is_interior())
        .collect();
    Classification {
        weak,
        proper,
        pareto_status: if polyhedral {
            ParetoStatus::Exact
        } else {
            ParetoStatus::BracketedOnly
        },
    }
}

impl SolutionCloud {
    pub fn n(&self) -> usize {
        self.samples.first().map_or(0, |s| s.outcome.point.len())
    }

    pub fn m(&self) -> usize {
        self.samples.first().map_or(0, |s| s.xi.len())
    }

    /// Distinct weights in first-appearance order.
    pub fn weights(&self) -> Vec<SimplexWeight> {
        let mut out: Vec<SimplexWeight> = Vec::new();
        for s in &self.samples {
            if out.last() != Some(&s.xi) && !out.contains(&s.xi) {
                out.push(s.xi.clone());
            }
        }
        out
    }

    /// Indices of converged samples in `class`; `None` for the Pareto class when
    /// it is only bracketed.
    pub fn select(&self, class: SolutionClass, polyhedral: bool) -> Option<Vec<usize>> {
        let c = classify_samples(self, polyhedral);
        match class {
            SolutionClass::Weak => Some(c.weak),
            SolutionClass::Proper => Some(c.proper),
            SolutionClass::Pareto => (c.pareto_status == ParetoStatus::Exact).then_some(c.proper),
        }
    }

    /// `xi_1..xi_m, interior, status, iterations, residual, x_1..x_n`, one row
    /// per sample in grid order. Floats use shortest round-trip formatting.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let (m, n) = (self.m(), self.n());
        let mut header: Vec<String> = (1..=m).map(|i| format!("xi_{i}")).collect();
        header.extend(["interior", "status", "iterations", "residual"].map(String::from));
        header.extend((1..=n).map(|i| format!("x_{i}")));
        w.write_record(&header)?;
        for s in &self.samples {
            let mut row: Vec<String> = s.xi.weights().iter().map(|v| fmt_f64(*v)).collect();
            row.push(s.xi.is_interior().to_string());
            row.push(s.outcome.status.as_str().to_string());
            row.push(s.outcome.iterations.to_string());
            row.push(fmt_f64(s.outcome.residual));
            row.extend(s.outcome.point.iter().map(|v| fmt_f64(*v)));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn read_csv<R: Read>(input: R, problem: &str) -> Result<SolutionCloud> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let m = header.iter().take_while(|h| h.starts_with("xi_")).count();
        let expect = ["interior", "status", "iterations", "residual"];
        if m == 0 || header.len() < m + 4 || (0..4).any(|i| &header[m + i] != expect[i]) {
            return Err(VviError::Cloud("unexpected header".into()));
        }
        let n = header.len() - m - 4;
        let num = |s: &str, line: usize| {
            s.parse::<f64>()
                .map_err(|_| VviError::Cloud(format!("row {line}: cannot parse `{s}`")))
        };
        let mut samples = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec.len() != m + 4 + n {
                return Err(VviError::Cloud(format!("row {line}: wrong column count")));
            }
            let w = (0..m).map(|i| num(&rec[i], line)).collect::<Result<Vec<_>>>()?;
            let xi = SimplexWeight::new(w)?;
            let status = SolveStatus::parse(&rec[m + 1])
                .ok_or_else(|| VviError::Cloud(format!("row {line}: bad status `{}`", &rec[m + 1])))?;
            let iterations = rec[m + 2]
                .parse()
                .map_err(|_| VviError::Cloud(format!("row {line}: bad iteration count")))?;
            let residual = num(&rec[m + 3], line)?;
            let point = (0..n).map(|i| num(&rec[m + 4 + i], line)).collect::<Result<Vec<_>>>()?;
            samples.push(SolutionSample {
                xi,
                outcome: SolveOutcome {
                    status,
                    point,
                    residual,
                    iterations,
                    steps: None,
                },
                start_index: 0,
            });
        }
        let weights: Vec<SimplexWeight> = {
            let mut v: Vec<SimplexWeight> = Vec::new();
            for s in &samples {
                if !v.contains(&s.xi) {
                    v.push(s.xi.clone());
                }
            }
            v
        };
        let interior_margin = weights
            .iter()
            .flat_map(|w| w.weights().iter().copied())
            .fold(f64::INFINITY, f64::min);
        Ok(SolutionCloud {
            problem: problem.to_string(),
            resolution: infer_resolution(&weights).unwrap_or(0),
            interior_margin: if interior_margin.is_finite() {
                interior_margin
            } else {
                0.0
            },
            samples,
        })
    }
}

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v}")
}
