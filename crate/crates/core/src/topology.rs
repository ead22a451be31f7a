//! Connected components of a sampled solution set, a radius probe for their
//! boundedness, and a consistency audit against the connectedness theorems.
//!
//! Components are those of the ε-graph on converged points: an edge joins two
//! points at distance at most `δ`. A lattice sweep alone under-links wherever
//! `S(ξ)` moves fast, so [`refine_cloud`] first bridges lattice-adjacent
//! samples that are farther apart than `δ` by bisecting the weight segment
//! between them. A bisection point that fails to converge leaves that gap open.

use serde::{Deserialize, Serialize};

use crate::error::{Result, VviError};
use crate::linalg::{dist, norm};
use crate::par::Execution;
use crate::problem::VviProblem;
use crate::sweep::{SolutionClass, SolutionCloud, SolutionSample};
use crate::vi::{natural_residual, scalarize, solve_vi, SimplexWeight, SolveOutcome, SolveStatus, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundedness {
    Bounded,
    Unbounded,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbePoint {
    #[serde(rename = "R")]
    pub radius: f64,
    pub norm: f64,
    /// Weight at which `norm` was attained.
    pub xi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentReport {
    pub id: usize,
    /// Sample indices into the cloud the components were built from.
    #[serde(skip)]
    pub members: Vec<usize>,
    pub size: usize,
    pub diameter: f64,
    pub max_norm: f64,
    pub boundedness: Boundedness,
    #[serde(rename = "probe")]
    pub probe_trace: Vec<ProbePoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decomposition {
    /// No converged sample in the requested class.
    EmptySet,
    Components(Vec<ComponentReport>),
}

impl Decomposition {
    pub fn components(&self) -> &[ComponentReport] {
        match self {
            Decomposition::EmptySet => &[],
            Decomposition::Components(c) => c,
        }
    }

    pub fn count(&self) -> usize {
        self.components().len()
    }
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> UnionFind {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Converged samples of `class`. Pareto is estimated by the proper samples;
/// whether that estimate is exact is the audit's concern.
pub fn class_members(cloud: &SolutionCloud, class: SolutionClass) -> Vec<usize> {
    cloud
        .samples
        .iter()
        .enumerate()
        .filter(|(_, s)| s.outcome.converged() && in_class(&s.xi, class))
        .map(|(i, _)| i)
        .collect()
}

fn in_class(xi: &SimplexWeight, class: SolutionClass) -> bool {
    class == SolutionClass::Weak || xi.is_interior()
}

/// Components of the ε-graph on the converged samples of `class`, ordered by
/// their smallest member index. Boundedness starts out `Inconclusive`.
pub fn build_components(cloud: &SolutionCloud, class: SolutionClass, delta: f64) -> Result<Decomposition> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(VviError::InvalidArgument(format!(
            "linking radius must be positive, got {delta}"
        )));
    }
    let idx = class_members(cloud, class);
    if idx.is_empty() {
        return Ok(Decomposition::EmptySet);
    }
    let pts: Vec<&[f64]> = idx.iter().map(|&i| cloud.samples[i].outcome.point.as_slice()).collect();
    let mut uf = UnionFind::new(pts.len());
    for a in 0..pts.len() {
        for b in a + 1..pts.len() {
            if dist(pts[a], pts[b]) <= delta {
                uf.union(a, b);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot_of_root = vec![usize::MAX; pts.len()];
    for a in 0..pts.len() {
        let r = uf.find(a);
        if slot_of_root[r] == usize::MAX {
            slot_of_root[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot_of_root[r]].push(a);
    }
    let reports = groups
        .into_iter()
        .enumerate()
        .map(|(id, g)| {
            let mut diameter: f64 = 0.0;
            for (k, &a) in g.iter().enumerate() {
                for &b in &g[k + 1..] {
                    diameter = diameter.max(dist(pts[a], pts[b]));
                }
            }
            let max_norm = g.iter().map(|&a| norm(pts[a])).fold(0.0, f64::max);
            ComponentReport {
                id,
                members: g.iter().map(|&a| idx[a]).collect(),
                size: g.len(),
                diameter,
                max_norm,
                boundedness: Boundedness::Inconclusive,
                probe_trace: Vec::new(),
            }
        })
        .collect();
    Ok(Decomposition::Components(reports))
}

const DUPLICATE_TOL: f64 = 1e-9;

/// Five times the median distance from each converged sample of `class` to its
/// nearest distinct neighbour; `None` with fewer than two distinct points.
pub fn default_delta(cloud: &SolutionCloud, class: SolutionClass) -> Option<f64> {
    let idx = class_members(cloud, class);
    let pts: Vec<&[f64]> = idx.iter().map(|&i| cloud.samples[i].outcome.point.as_slice()).collect();
    if pts.len() < 2 {
        return None;
    }
    // repeated points (e.g. many weights sharing a vertex of K) are skipped
    let mut nn: Vec<f64> = (0..pts.len())
        .map(|a| {
            (0..pts.len())
                .map(|b| dist(pts[a], pts[b]))
                .filter(|d| *d > DUPLICATE_TOL)
                .fold(f64::INFINITY, f64::min)
        })
        .filter(|d| d.is_finite())
        .collect();
    if nn.is_empty() {
        return None;
    }
    nn.sort_by(f64::total_cmp);
    let k = nn.len();
    let median = if k % 2 == 1 {
        nn[k / 2]
    } else {
        0.5 * (nn[k / 2 - 1] + nn[k / 2])
    };
    (median > 0.0).then_some(5.0 * median)
}

#[derive(Debug, Clone, Copy)]
pub struct RefineOptions {
    pub solver: SolverOptions,
    /// Deepest bisection level of one lattice edge.
    pub max_depth: usize,
    /// Solve budget per lattice edge.
    pub max_solves: usize,
    pub execution: Execution,
}

impl Default for RefineOptions {
    fn default() -> Self {
        RefineOptions {
            solver: SolverOptions::default(),
            max_depth: 24,
            max_solves: 1024,
            execution: Execution::default(),
        }
    }
}

/// Integer lattice coordinates of `xi` at `resolution`, if it is a lattice point.
fn lattice_coords(xi: &SimplexWeight, resolution: usize) -> Option<Vec<usize>> {
    let r = resolution as f64;
    xi.weights()
        .iter()
        .map(|w| {
            let k = w * r;
            ((k - k.round()).abs() <= 1e-7).then_some(k.round() as usize)
        })
        .collect()
}

enum Bridge {
    /// Two samples at lattice-adjacent weights.
    Edge(usize, usize),
    /// Two solutions of the same scalarization.
    Segment(usize, usize),
}

/// Returns `cloud` with extra samples that link nearby pieces of `S`.
///
/// For every pair of lattice-adjacent weights (one lattice step moved between
/// two coordinates) each converged sample is paired with the nearest converged
/// sample at the neighbour. Pairs farther apart than `delta` are bridged by
/// bisecting the weight segment, warm-starting each solve from the nearer end.
/// Distinct solutions found at the same weight are bridged along the segment
/// between them when every intermediate point passes the residual test, which
/// is the case whenever `Sol(F_ξ, K)` is convex.
///
/// New samples are appended after the original ones in a fixed order, so the
/// result does not depend on the execution mode.
pub fn refine_cloud(
    problem: &VviProblem,
    cloud: &SolutionCloud,
    class: SolutionClass,
    delta: f64,
    opts: &RefineOptions,
) -> Result<SolutionCloud> {
    if !(delta > 0.0) {
        return Err(VviError::InvalidArgument(format!(
            "linking radius must be positive, got {delta}"
        )));
    }
    opts.solver.validate()?;
    let idx = class_members(cloud, class);
    let mut tasks: Vec<Bridge> = Vec::new();

    // group eligible samples by weight, in first-appearance order
    let mut weights: Vec<(SimplexWeight, Vec<usize>)> = Vec::new();
    for &i in &idx {
        let xi = &cloud.samples[i].xi;
        match weights.iter_mut().find(|(w, _)| w == xi) {
            Some((_, v)) => v.push(i),
            None => weights.push((xi.clone(), vec![i])),
        }
    }
    for (_, group) in &weights {
        for (k, &a) in group.iter().enumerate() {
            for &b in &group[k + 1..] {
                if dist(&cloud.samples[a].outcome.point, &cloud.samples[b].outcome.point) > delta {
                    tasks.push(Bridge::Segment(a, b));
                }
            }
        }
    }
    if cloud.resolution > 0 {
        let coords: Vec<Option<Vec<usize>>> = weights
            .iter()
            .map(|(w, _)| lattice_coords(w, cloud.resolution))
            .collect();
        for (p, cp) in coords.iter().enumerate() {
            let Some(cp) = cp else { continue };
            for (q, cq) in coords.iter().enumerate().skip(p + 1) {
                let Some(cq) = cq else { continue };
                let l1: usize = cp.iter().zip(cq).map(|(a, b)| a.abs_diff(*b)).sum();
                if l1 != 2 {
                    continue;
                }
                for &a in &weights[p].1 {
                    let pa = &cloud.samples[a].outcome.point;
                    let b = *weights[q]
                        .1
                        .iter()
                        .min_by(|&&u, &&v| {
                            dist(pa, &cloud.samples[u].outcome.point)
                                .total_cmp(&dist(pa, &cloud.samples[v].outcome.point))
                        })
                        .expect("groups are nonempty");
                    if dist(pa, &cloud.samples[b].outcome.point) > delta {
                        tasks.push(Bridge::Edge(a, b));
                    }
                }
            }
        }
    }

    let added = opts.execution.map(&tasks, |task| match *task {
        Bridge::Edge(a, b) => bridge_edge(problem, &cloud.samples[a], &cloud.samples[b], delta, opts),
        Bridge::Segment(a, b) => bridge_segment(problem, &cloud.samples[a], &cloud.samples[b], delta, opts),
    });
    let mut out = cloud.clone();
    for batch in added {
        out.samples.extend(batch?);
    }
    Ok(out)
}

fn bridge_edge(
    problem: &VviProblem,
    a: &SolutionSample,
    b: &SolutionSample,
    delta: f64,
    opts: &RefineOptions,
) -> Result<Vec<SolutionSample>> {
    let mut out = Vec::new();
    let mut budget = opts.max_solves;
    // depth-first with an explicit stack; the right half is pushed first so
    // samples come out ordered from `a` to `b`
    let mut stack: Vec<(SolutionSample, SolutionSample, usize)> = vec![(a.clone(), b.clone(), 0)];
    while let Some((lo, hi, depth)) = stack.pop() {
        if dist(&lo.outcome.point, &hi.outcome.point) <= delta || depth >= opts.max_depth || budget == 0 {
            continue;
        }
        budget -= 1;
        let xi = lo.xi.lerp(&hi.xi, 0.5);
        let field = scalarize(problem, &xi)?;
        let outcome = solve_vi(&field, &problem.set, &lo.outcome.point, &opts.solver)?;
        if !outcome.converged() {
            continue;
        }
        let mid = SolutionSample {
            xi,
            outcome,
            start_index: 0,
        };
        out.push(mid.clone());
        stack.push((mid.clone(), hi, depth + 1));
        stack.push((lo, mid, depth + 1));
    }
    Ok(out)
}

fn bridge_segment(
    problem: &VviProblem,
    a: &SolutionSample,
    b: &SolutionSample,
    delta: f64,
    opts: &RefineOptions,
) -> Result<Vec<SolutionSample>> {
    let field = scalarize(problem, &a.xi)?;
    let (pa, pb) = (&a.outcome.point, &b.outcome.point);
    let pieces = (dist(pa, pb) / delta).ceil().min(opts.max_solves as f64) as usize;
    let mut out = Vec::with_capacity(pieces.saturating_sub(1));
    for k in 1..pieces {
        let s = k as f64 / pieces as f64;
        let x: Vec<f64> = pa.iter().zip(pb).map(|(u, v)| u + s * (v - u)).collect();
        if !problem.set.contains(&x, 1e-9) {
            return Ok(Vec::new());
        }
        let residual = natural_residual(&field, &problem.set, &x)?;
        if !(residual <= opts.solver.tol) {
            return Ok(Vec::new());
        }
        out.push(SolutionSample {
            xi: a.xi.clone(),
            outcome: SolveOutcome {
                status: SolveStatus::Converged,
                point: x,
                residual,
                iterations: 0,
                steps: None,
            },
            start_index: 0,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ProbeOptions {
    /// Strictly increasing radii; at least two.
    pub radii: Vec<f64>,
    pub solver: SolverOptions,
    /// Number of halvings of the distance from the anchor weight to a target.
    pub path_steps: usize,
    pub execution: Execution,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            radii: vec![10.0, 1e2, 1e3, 1e4],
            solver: SolverOptions::default(),
            path_steps: 12,
            execution: Execution::default(),
        }
    }
}

impl ProbeOptions {
    pub fn validate(&self) -> Result<()> {
        if self.radii.len() < 2 {
            return Err(VviError::InvalidArgument(
                "the radius schedule needs at least two radii".into(),
            ));
        }
        if self.radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) || self.radii.windows(2).any(|w| w[0] >= w[1]) {
            return Err(VviError::InvalidArgument(format!(
                "radii must be positive and strictly increasing: {:?}",
                self.radii
            )));
        }
        self.solver.validate()
    }
}

/// Fraction of the cloud's lattice weights, restricted to `class`, that carry
/// at least one converged sample. `None` when the class has no lattice weight.
pub fn domain_coverage(cloud: &SolutionCloud, class: SolutionClass) -> Option<f64> {
    let mut seen: Vec<(&SimplexWeight, bool)> = Vec::new();
    for s in &cloud.samples {
        if !in_class(&s.xi, class) {
            continue;
        }
        if cloud.resolution > 0 && lattice_coords(&s.xi, cloud.resolution).is_none() {
            continue;
        }
        match seen.iter_mut().find(|(w, _)| *w == &s.xi) {
            Some((_, ok)) => *ok |= s.outcome.converged(),
            None => seen.push((&s.xi, s.outcome.converged())),
        }
    }
    (!seen.is_empty()).then(|| seen.iter().filter(|(_, ok)| *ok).count() as f64 / seen.len() as f64)
}

/// Probes whether `component` escapes every ball.
///
/// The anchor is the member of largest norm. The targets are the lattice
/// weights of `class` nearest to the anchor weight that carry no converged
/// member of this component: past them the component ends or `S` is empty. For
/// each radius `R` the scalarized problem is re-solved on `K ∩ Ball(0, R)` at
/// the anchor weight and along the weight path toward every target, warm
/// started, and the largest solution norm seen is recorded.
///
/// `Unbounded`: norm at least `0.99 R` at the two largest radii and never
/// decreasing along the schedule. `Bounded`: the norm changes by less than
/// `1e-6` across the two largest radii while staying below `0.99 R`.
pub fn boundedness_probe(
    problem: &VviProblem,
    component: &ComponentReport,
    cloud: &SolutionCloud,
    class: SolutionClass,
    opts: &ProbeOptions,
) -> Result<ComponentReport> {
    opts.validate()?;
    let anchor = *component
        .members
        .iter()
        .max_by(|&&a, &&b| {
            norm(&cloud.samples[a].outcome.point)
                .total_cmp(&norm(&cloud.samples[b].outcome.point))
                .then(b.cmp(&a))
        })
        .ok_or_else(|| VviError::InvalidArgument("component has no members".into()))?;
    let anchor = &cloud.samples[anchor];
    let targets = probe_targets(component, cloud, class, &anchor.xi);

    let mut trace = Vec::with_capacity(opts.radii.len());
    for &radius in &opts.radii {
        let set = problem.set.intersect_ball(radius)?;
        let mut best = ProbePoint {
            radius,
            norm: f64::NAN,
            xi: anchor.xi.weights().to_vec(),
        };
        let start = set.project(&anchor.outcome.point)?;
        let field = scalarize(problem, &anchor.xi)?;
        let base = solve_vi(&field, &set, &start, &opts.solver)?;
        record(&mut best, &anchor.xi, &base);
        let warm = if base.converged() { base.point.clone() } else { start };
        'targets: for target in &targets {
            let mut x = warm.clone();
            for k in 1..=opts.path_steps + 1 {
                let t = if k > opts.path_steps {
                    1.0
                } else {
                    1.0 - 0.5f64.powi(k as i32)
                };
                let xi = anchor.xi.lerp(target, t);
                let field = scalarize(problem, &xi)?;
                let out = solve_vi(&field, &set, &x, &opts.solver)?;
                record(&mut best, &xi, &out);
                if out.converged() {
                    x = out.point;
                }
                if best.norm >= 0.99 * radius {
                    break 'targets;
                }
            }
        }
        trace.push(best);
    }

    let k = trace.len();
    let (prev, last) = (&trace[k - 2], &trace[k - 1]);
    let nondecreasing = trace.windows(2).all(|w| w[1].norm >= w[0].norm);
    let boundedness = if prev.norm >= 0.99 * prev.radius && last.norm >= 0.99 * last.radius && nondecreasing {
        Boundedness::Unbounded
    } else if (last.norm - prev.norm).abs() < 1e-6 && last.norm < 0.99 * last.radius {
        Boundedness::Bounded
    } else {
        Boundedness::Inconclusive
    };
    Ok(ComponentReport {
        boundedness,
        probe_trace: trace,
        ..component.clone()
    })
}

fn record(best: &mut ProbePoint, xi: &SimplexWeight, out: &SolveOutcome) {
    if out.converged() {
        let v = norm(&out.point);
        if !(v <= best.norm) {
            best.norm = v;
            best.xi = xi.weights().to_vec();
        }
    }
}

fn probe_targets(
    component: &ComponentReport,
    cloud: &SolutionCloud,
    class: SolutionClass,
    anchor: &SimplexWeight,
) -> Vec<SimplexWeight> {
    let mut candidates: Vec<SimplexWeight> = Vec::new();
    for s in &cloud.samples {
        if !in_class(&s.xi, class) || candidates.contains(&s.xi) {
            continue;
        }
        if cloud.resolution > 0 && lattice_coords(&s.xi, cloud.resolution).is_none() {
            continue;
        }
        let covered = component.members.iter().any(|&i| cloud.samples[i].xi == s.xi);
        if !covered {
            candidates.push(s.xi.clone());
        }
    }
    let d = |w: &SimplexWeight| dist(w.weights(), anchor.weights());
    let Some(best) = candidates.iter().map(d).min_by(f64::total_cmp) else {
        return Vec::new();
    };
    candidates.into_iter().filter(|w| d(w) <= best + 1e-12).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Consistency {
    Consistent,
    Violation,
    Inconclusive,
    /// The sampled set is empty; the theorems assume nonemptiness.
    EmptySet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremVerdict {
    pub class: SolutionClass,
    pub component_count: usize,
    pub all_components_unbounded: bool,
    pub bounded_and_nonempty: bool,
    pub connected: bool,
    /// Fraction of lattice weights with a converged sample, when known.
    pub domain_coverage: Option<f64>,
    pub monotone_certified: bool,
    pub consistency: Consistency,
    pub notes: Vec<String>,
}

const REMEDIATION: &str =
    "likely a sampling artifact: try a finer grid, a smaller linking radius or larger probe radii";

/// Cross-checks probed components against the structure theorems for
/// monotone problems:
///
/// * (i) two or more components must all be unbounded;
/// * (ii) a bounded nonempty set must be connected;
/// * (iii) for the weak class, a bounded nonempty set has full weight coverage;
/// * (iv) the Pareto class is only audited for polyhedral `K`.
///
/// Only a contradiction of (i)/(ii) with monotonicity certified is a
/// `Violation`; without the hypothesis it is reported as an observation.
pub fn theorem_audit(
    decomposition: &Decomposition,
    class: SolutionClass,
    polyhedral: bool,
    monotone_certified: bool,
    domain_coverage: Option<f64>,
) -> TheoremVerdict {
    let comps = decomposition.components();
    let count = comps.len();
    let all_unbounded = count > 0 && comps.iter().all(|c| c.boundedness == Boundedness::Unbounded);
    let all_bounded = count > 0 && comps.iter().all(|c| c.boundedness == Boundedness::Bounded);
    let any_bounded = comps.iter().any(|c| c.boundedness == Boundedness::Bounded);
    let mut notes = Vec::new();
    let mut consistency = Consistency::Consistent;

    if !monotone_certified {
        notes.push("monotonicity not certified: the theorems' hypotheses may fail".to_string());
    }
    if count == 0 {
        notes.push("no converged sample in this class".to_string());
        consistency = Consistency::EmptySet;
    } else if class == SolutionClass::Pareto && !polyhedral {
        notes.push(
            "K is not polyhedral: the Pareto set is only bracketed by the proper and weak sets, observation only"
                .to_string(),
        );
        consistency = Consistency::Inconclusive;
    } else if count >= 2 {
        if any_bounded {
            if monotone_certified {
                notes.push(format!("{count} components but at least one is bounded; {REMEDIATION}"));
                consistency = Consistency::Violation;
            } else {
                notes.push(format!("{count} components with a bounded one"));
                consistency = Consistency::Inconclusive;
            }
        } else if !all_unbounded {
            notes.push("some component could not be classified by the radius probe".to_string());
            consistency = Consistency::Inconclusive;
        }
    } else if all_bounded && class == SolutionClass::Weak {
        match domain_coverage {
            Some(c) if c < 1.0 => {
                notes.push(format!(
                    "bounded weak set but only {:.1}% of weights have a solution",
                    100.0 * c
                ));
                consistency = Consistency::Inconclusive;
            }
            None => notes.push("weight coverage unknown".to_string()),
            _ => {}
        }
    }
    TheoremVerdict {
        class,
        component_count: count,
        all_components_unbounded: all_unbounded,
        bounded_and_nonempty: all_bounded,
        connected: count == 1,
        domain_coverage,
        monotone_certified,
        consistency,
        notes,
    }
}

#[derive(Debug, Clone)]
pub struct TopologyOptions {
    /// Linking radius; defaults to [`default_delta`] on the unrefined cloud.
    pub delta: Option<f64>,
    pub refine: Option<RefineOptions>,
    pub probe: ProbeOptions,
}

impl Default for TopologyOptions {
    fn default() -> Self {
        TopologyOptions {
            delta: None,
            refine: Some(RefineOptions::default()),
            probe: ProbeOptions::default(),
        }
    }
}

/// Everything `components` reports: the probed components and the verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopologyReport {
    pub problem: String,
    pub class: SolutionClass,
    pub delta: f64,
    /// Samples in the refined cloud the components were built on.
    pub samples: usize,
    pub components: Vec<ComponentReport>,
    pub verdict: TheoremVerdict,
    #[serde(skip)]
    pub cloud: SolutionCloud,
}

impl TopologyReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Refine, decompose, probe every component (in parallel) and audit.
pub fn analyze(
    problem: &VviProblem,
    cloud: &SolutionCloud,
    class: SolutionClass,
    monotone_certified: bool,
    opts: &TopologyOptions,
) -> Result<TopologyReport> {
    opts.probe.validate()?;
    let coverage = domain_coverage(cloud, class);
    let delta = match opts.delta {
        Some(d) => d,
        None => default_delta(cloud, class).unwrap_or(1e-6),
    };
    let refined = match &opts.refine {
        Some(r) => refine_cloud(problem, cloud, class, delta, r)?,
        None => cloud.clone(),
    };
    let decomposition = build_components(&refined, class, delta)?;
    let probed = opts.probe.execution.map(decomposition.components(), |c| {
        boundedness_probe(problem, c, &refined, class, &opts.probe)
    });
    let components = probed.into_iter().collect::<Result<Vec<_>>>()?;
    let decomposition = match decomposition {
        Decomposition::EmptySet => Decomposition::EmptySet,
        Decomposition::Components(_) => Decomposition::Components(components.clone()),
    };
    let verdict = theorem_audit(
        &decomposition,
        class,
        problem.set.is_polyhedral(),
        monotone_certified,
        coverage,
    );
    Ok(TopologyReport {
        problem: problem.name.clone(),
        class,
        delta,
        samples: refined.samples.len(),
        components,
        verdict,
        cloud: refined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::sweep::{simplex_grid, sweep, SweepOptions};

    fn cloud_of(problem: &VviProblem, resolution: usize) -> SolutionCloud {
        let opts = SweepOptions {
            starts: 1,
            ..Default::default()
        };
        sweep(problem, &simplex_grid(problem.m(), resolution, 0.0).unwrap(), &opts).unwrap()
    }

    fn converged_sample(xi: Vec<f64>, point: Vec<f64>) -> SolutionSample {
        SolutionSample {
            xi: SimplexWeight::new(xi).unwrap(),
            outcome: SolveOutcome {
                status: SolveStatus::Converged,
                point,
                residual: 0.0,
                iterations: 1,
                steps: None,
            },
            start_index: 0,
        }
    }

    fn synthetic(points: &[[f64; 2]]) -> SolutionCloud {
        SolutionCloud {
            problem: "synthetic".into(),
            samples: points.iter().map(|p| converged_sample(vec![1.0], p.to_vec())).collect(),
            resolution: 1,
            interior_margin: 1.0,
        }
    }

    /// Components must be exactly the connected pieces of the ε-graph.
    fn assert_partition(cloud: &SolutionCloud, d: &Decomposition, delta: f64) {
        let mut all: Vec<usize> = d.components().iter().flat_map(|c| c.members.clone()).collect();
        all.sort();
        assert_eq!(all, class_members(cloud, SolutionClass::Weak));
        let pt = |i: usize| &cloud.samples[i].outcome.point;
        for (a, ca) in d.components().iter().enumerate() {
            for cb in &d.components()[a + 1..] {
                for &i in &ca.members {
                    for &j in &cb.members {
                        assert!(dist(pt(i), pt(j)) > delta);
                    }
                }
            }
            // breadth-first search over ≤ δ edges reaches every member
            let mut reached = vec![ca.members[0]];
            let mut k = 0;
            while k < reached.len() {
                let i = reached[k];
                for &j in &ca.members {
                    if !reached.contains(&j) && dist(pt(i), pt(j)) <= delta {
                        reached.push(j);
                    }
                }
                k += 1;
            }
            assert_eq!(reached.len(), ca.members.len());
        }
    }

    #[test]
    fn single_sample_is_one_point_component() {
        let cloud = synthetic(&[[3.0, 4.0]]);
        for delta in [1e-9, 1.0, 1e9] {
            let d = build_components(&cloud, SolutionClass::Weak, delta).unwrap();
            assert_eq!(d.count(), 1);
            assert_eq!(d.components()[0].diameter, 0.0);
            assert_eq!(d.components()[0].max_norm, 5.0);
        }
        assert_eq!(default_delta(&cloud, SolutionClass::Weak), None);
    }

    #[test]
    fn empty_selection_is_empty_set() {
        let mut cloud = cloud_of(&catalog::example_p(), 2);
        cloud.samples.retain(|s| !s.outcome.converged() || !s.xi.is_interior());
        assert_eq!(
            build_components(&cloud, SolutionClass::Proper, 1.0).unwrap(),
            Decomposition::EmptySet
        );
        let v = theorem_audit(&Decomposition::EmptySet, SolutionClass::Proper, true, true, None);
        assert_eq!(v.consistency, Consistency::EmptySet);
        assert!(build_components(&cloud, SolutionClass::Weak, 0.0).is_err());
    }

    #[test]
    fn count_is_nonincreasing_in_delta() {
        let cloud = cloud_of(&catalog::example_p(), 40);
        let base = default_delta(&cloud, SolutionClass::Weak).unwrap();
        for delta in [base / 8.0, base, 10.0 * base] {
            let counts: Vec<usize> = [1.0, 2.0, 4.0]
                .iter()
                .map(|k| {
                    let d = build_components(&cloud, SolutionClass::Weak, k * delta).unwrap();
                    assert_partition(&cloud, &d, k * delta);
                    d.count()
                })
                .collect();
            assert!(counts[0] >= counts[1] && counts[1] >= counts[2], "{counts:?}");
        }
    }

    #[test]
    fn example_q_links_into_one_component() {
        let p = catalog::example_q();
        let cloud = cloud_of(&p, 100);
        // the lattice alone leaves the ends detached: ∛0.01 ≈ 0.215 > 0.1
        assert!(build_components(&cloud, SolutionClass::Weak, 0.1).unwrap().count() > 1);
        let refined = refine_cloud(&p, &cloud, SolutionClass::Weak, 0.1, &RefineOptions::default()).unwrap();
        let d = build_components(&refined, SolutionClass::Weak, 0.1).unwrap();
        assert_eq!(d.count(), 1);
        assert_partition(&refined, &d, 0.1);
        for s in &refined.samples[cloud.samples.len()..] {
            let oracle = catalog::closed_form_q(s.xi.weights()[0]).unwrap();
            assert!(dist(&s.outcome.point, &oracle) <= 1e-6);
        }
    }

    #[test]
    fn example_p_splits_into_two_unbounded_components() {
        let p = catalog::example_p();
        let cloud = cloud_of(&p, 100);
        let refined = refine_cloud(&p, &cloud, SolutionClass::Weak, 0.5, &RefineOptions::default()).unwrap();
        assert_eq!(build_components(&refined, SolutionClass::Weak, 0.5).unwrap().count(), 2);

        let report = analyze(&p, &cloud, SolutionClass::Weak, false, &TopologyOptions::default()).unwrap();
        assert_eq!(report.components.len(), 2);
        for c in &report.components {
            assert_eq!(c.boundedness, Boundedness::Unbounded, "{:?}", c.probe_trace);
            for pt in c.probe_trace.iter().filter(|t| t.radius >= 1e3) {
                assert!(pt.norm >= 0.99 * pt.radius);
            }
        }
        assert_eq!(report.verdict.consistency, Consistency::Consistent);
        assert!(report.verdict.all_components_unbounded);
    }

    #[test]
    fn example_p_separation_across_resolutions() {
        let p = catalog::example_p();
        for resolution in [20, 21, 40, 100] {
            // closed-form oracle: smallest distance between the two branches
            // over the lattice points, which is at least 2 since |x1| >= 1
            let branch: Vec<(f64, [f64; 2])> = (0..=resolution)
                .filter_map(|k| {
                    let t = k as f64 / resolution as f64;
                    catalog::closed_form_p(t).unwrap().map(|x| (t, x))
                })
                .collect();
            let mut gap = f64::INFINITY;
            for (t, x) in &branch {
                for (u, y) in &branch {
                    if *t < 0.5 && *u > 0.5 {
                        gap = gap.min(dist(x, y));
                    }
                }
            }
            assert!(gap >= 2.0);
            let delta = 0.5 * gap;
            let cloud = cloud_of(&p, resolution);
            let refined = refine_cloud(&p, &cloud, SolutionClass::Weak, delta, &RefineOptions::default()).unwrap();
            let d = build_components(&refined, SolutionClass::Weak, delta).unwrap();
            assert_eq!(d.count(), 2, "resolution {resolution}");
        }
    }

    #[test]
    fn example_q_is_bounded_and_consistent() {
        let p = catalog::example_q();
        let cloud = cloud_of(&p, 50);
        let report = analyze(&p, &cloud, SolutionClass::Weak, true, &TopologyOptions::default()).unwrap();
        assert_eq!(report.components.len(), 1);
        let c = &report.components[0];
        assert_eq!(c.boundedness, Boundedness::Bounded, "{:?}", c.probe_trace);
        assert!(c.max_norm <= 1.3);
        assert_eq!(report.verdict.domain_coverage, Some(1.0));
        assert_eq!(report.verdict.consistency, Consistency::Consistent);
        assert!(report.verdict.connected);
    }

    #[test]
    fn strongly_monotone_single_criterion_is_bounded() {
        let p = catalog::random_affine_vvi(
            3,
            1,
            11,
            catalog::MonotoneClass::Symmetric,
            catalog::SetKind::WholeSpace,
        )
        .unwrap();
        let mut p = p;
        // make the field strongly monotone regardless of the draw
        let f = p.fields()[0].clone();
        if let crate::expr::VectorField::Affine { matrix, offset } = f {
            let m = matrix + nalgebra::DMatrix::identity(3, 3);
            p = VviProblem::new(
                "strong",
                vec![crate::expr::VectorField::affine(m, offset).unwrap()],
                p.set,
            )
            .unwrap();
        }
        let cloud = cloud_of(&p, 4);
        let report = analyze(&p, &cloud, SolutionClass::Weak, true, &TopologyOptions::default()).unwrap();
        assert_eq!(report.components.len(), 1);
        assert_eq!(report.components[0].boundedness, Boundedness::Bounded);
        let norms: Vec<f64> = report.components[0].probe_trace.iter().map(|t| t.norm).collect();
        assert!(norms.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-6));
    }

    #[test]
    fn synthetic_bounded_pair_is_a_violation() {
        let cloud = synthetic(&[[0.0, 0.0], [0.0, 0.01], [10.0, 10.0]]);
        let d = build_components(&cloud, SolutionClass::Weak, 0.1).unwrap();
        assert_eq!(d.count(), 2);
        let mut comps = d.components().to_vec();
        comps[0].boundedness = Boundedness::Bounded;
        comps[1].boundedness = Boundedness::Unbounded;
        let d = Decomposition::Components(comps);
        let v = theorem_audit(&d, SolutionClass::Weak, true, true, Some(1.0));
        assert_eq!(v.consistency, Consistency::Violation);
        assert!(v.notes.iter().any(|n| n.contains("finer grid")));
        // without the monotone certificate the theorem does not apply
        let v = theorem_audit(&d, SolutionClass::Weak, true, false, Some(1.0));
        assert_eq!(v.consistency, Consistency::Inconclusive);
    }

    #[test]
    fn audit_rules() {
        let cloud = synthetic(&[[0.0, 0.0]]);
        let mut comps = build_components(&cloud, SolutionClass::Weak, 1.0)
            .unwrap()
            .components()
            .to_vec();
        comps[0].boundedness = Boundedness::Bounded;
        let d = Decomposition::Components(comps);
        let v = theorem_audit(&d, SolutionClass::Weak, true, true, Some(1.0));
        assert_eq!(v.consistency, Consistency::Consistent);
        assert!(v.connected && v.bounded_and_nonempty);
        assert_eq!(
            theorem_audit(&d, SolutionClass::Weak, true, true, Some(0.9)).consistency,
            Consistency::Inconclusive
        );
        assert_eq!(
            theorem_audit(&d, SolutionClass::Pareto, false, true, Some(1.0)).consistency,
            Consistency::Inconclusive
        );
        assert_eq!(
            theorem_audit(&d, SolutionClass::Pareto, true, true, Some(1.0)).consistency,
            Consistency::Consistent
        );
    }

    #[test]
    fn probe_rejects_short_schedules() {
        let p = catalog::example_q();
        let cloud = cloud_of(&p, 4);
        let d = build_components(&cloud, SolutionClass::Weak, 10.0).unwrap();
        for radii in [vec![10.0], vec![10.0, 10.0], vec![-1.0, 10.0]] {
            let opts = ProbeOptions {
                radii,
                ..Default::default()
            };
            assert!(boundedness_probe(&p, &d.components()[0], &cloud, SolutionClass::Weak, &opts).is_err());
        }
    }

    #[test]
    fn report_json_shape() {
        let p = catalog::example_q();
        let cloud = cloud_of(&p, 10);
        let report = analyze(&p, &cloud, SolutionClass::Weak, true, &TopologyOptions::default()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
        let c = &v["components"][0];
        for key in ["id", "size", "diameter", "max_norm", "boundedness", "probe"] {
            assert!(!c[key].is_null(), "{key}");
        }
        assert!(c["probe"][0]["R"].is_number());
        assert_eq!(v["verdict"]["consistency"], "Consistent");
    }
}
