//! `vvi`: sweeps, component analysis and hypothesis checks for vector
//! variational inequalities.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 a solve or verification
//! did not succeed, 3 the component audit found a violation.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use vvi_core::analysis::{check_monotone, classify_symmetry};
use vvi_core::catalog;
use vvi_core::par::{configure_threads, Execution};
use vvi_core::problem::VviProblem;
use vvi_core::sweep::{simplex_grid, sweep, SolutionClass, SolutionCloud, SweepOptions};
use vvi_core::topology::{analyze, Consistency, TopologyOptions};
use vvi_core::vi::{scalarize, solve_vi, SimplexWeight, SolverOptions};

const EXIT_FAILED: u8 = 2;
const EXIT_VIOLATION: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "vvi", version, about = "Solution sets of vector variational inequalities")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Worker threads; 0 picks automatically.
    #[arg(long, global = true, env = "VVI_THREADS", default_value_t = 0)]
    threads: usize,
    /// Natural-residual tolerance of every solve.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    /// Iteration cap of every solve.
    #[arg(long = "max-iter", global = true, default_value_t = 200_000)]
    max_iter: usize,
    /// Seed for random starts and sampled checks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one scalarization VI(F_xi, K).
    Solve {
        /// Catalog name or path to a problem JSON file.
        problem: String,
        /// Weights, e.g. 0.5,0.5.
        #[arg(long)]
        xi: String,
    },
    /// Sweep the weight simplex and write the solution cloud as CSV.
    Sweep {
        problem: String,
        #[arg(long)]
        resolution: usize,
        /// Keep only weights with every entry at least this large.
        #[arg(long, default_value_t = 0.0)]
        margin: f64,
        /// Starting points per weight.
        #[arg(long, default_value_t = 3)]
        starts: usize,
    },
    /// Connected components of a cloud, their boundedness and the audit.
    Components {
        /// Cloud CSV written by `sweep`.
        cloud: PathBuf,
        /// Problem the cloud was sampled from; used for linking and probing.
        #[arg(long)]
        problem: String,
        /// weak, proper or pareto.
        #[arg(long, default_value = "weak")]
        class: String,
        /// Linking radius; default is 5x the median nearest-neighbour distance.
        #[arg(long)]
        delta: Option<f64>,
        /// Probe radii, strictly increasing.
        #[arg(long, value_delimiter = ',', default_value = "10,100,1000,10000")]
        radii: Vec<f64>,
        /// Skip bisection linking of lattice neighbours.
        #[arg(long)]
        no_refine: bool,
        /// Treat the problem as monotone without sampling it.
        #[arg(long)]
        assume_monotone: bool,
        /// Pair samples for the monotonicity check.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Sampled monotonicity and Jacobian symmetry checks.
    Check {
        problem: String,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Compare a sweep of example-q or example-p against its closed form.
    VerifyExample {
        name: String,
        #[arg(long, default_value_t = 100)]
        resolution: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    configure_threads(cli.global.threads);
    let solver = SolverOptions {
        tol: cli.global.tol,
        max_iter: cli.global.max_iter,
        ..Default::default()
    };
    solver.validate()?;
    let g = &cli.global;
    match cli.command {
        Command::Solve { problem, xi } => cmd_solve(g, &solver, &problem, &xi),
        Command::Sweep {
            problem,
            resolution,
            margin,
            starts,
        } => cmd_sweep(g, &solver, &problem, resolution, margin, starts),
        Command::Components {
            cloud,
            problem,
            class,
            delta,
            radii,
            no_refine,
            assume_monotone,
            samples,
        } => {
            let class: SolutionClass = class.parse()?;
            let problem = load_problem(&problem)?;
            let text = fs::read_to_string(&cloud).with_context(|| format!("reading {}", cloud.display()))?;
            let cloud = SolutionCloud::read_csv(text.as_bytes(), &problem.name)?;
            let monotone =
                assume_monotone || check_monotone(&problem, samples, g.seed, (-2.0, 2.0))?.monotone_certified;
            let mut opts = TopologyOptions {
                delta,
                ..Default::default()
            };
            opts.probe.radii = radii;
            opts.probe.solver = solver;
            match opts.refine.as_mut() {
                Some(r) if !no_refine => r.solver = solver,
                _ => opts.refine = None,
            }
            let report = analyze(&problem, &cloud, class, monotone, &opts)?;
            emit(g.out.as_deref(), &report.to_json()?)?;
            Ok(match report.verdict.consistency {
                Consistency::Violation => {
                    eprintln!("audit: violation: {}", report.verdict.notes.join("; "));
                    EXIT_VIOLATION
                }
                Consistency::Inconclusive => {
                    eprintln!("warning: audit inconclusive: {}", report.verdict.notes.join("; "));
                    0
                }
                Consistency::EmptySet => {
                    eprintln!("warning: no converged sample in the {class:?} class");
                    0
                }
                Consistency::Consistent => 0,
            })
        }
        Command::Check { problem, samples } => {
            let problem = load_problem(&problem)?;
            let mono = check_monotone(&problem, samples, g.seed, (-2.0, 2.0))?;
            let sym = classify_symmetry(&problem, samples.min(200), g.seed)?;
            let doc = json!({
                "problem": problem.name,
                "monotone": mono.monotone_certified,
                "min_pairing": mono.min_pairing,
                "min_eig": mono.min_eig,
                "witness": mono.witness,
                "symmetry": sym.class,
                "max_sym_defect": sym.max_sym_defect,
                "max_skew_defect": sym.max_skew_defect,
            });
            emit(g.out.as_deref(), &serde_json::to_string_pretty(&doc)?)?;
            Ok(0)
        }
        Command::VerifyExample { name, resolution } => cmd_verify(g, &solver, &name, resolution),
    }
}

/// A JSON file if one exists at `reference`, otherwise a catalog name.
fn load_problem(reference: &str) -> Result<VviProblem> {
    let path = Path::new(reference);
    if path.is_file() {
        let text = fs::read_to_string(path).with_context(|| format!("reading {reference}"))?;
        return VviProblem::from_json(&text).with_context(|| format!("loading {reference}"));
    }
    Ok(catalog::resolve(reference)?)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            let mut body = text.to_string();
            if !body.ends_with('\n') {
                body.push('\n');
            }
            fs::write(path, body).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{}", text.trim_end_matches('\n'))?;
            Ok(())
        }
    }
}

fn cmd_solve(g: &Global, solver: &SolverOptions, problem: &str, xi: &str) -> Result<u8> {
    let problem = load_problem(problem)?;
    let xi = SimplexWeight::parse(xi)?;
    let field = scalarize(&problem, &xi)?;
    let start = problem.set.project(&vec![0.0; problem.n()])?;
    let outcome = solve_vi(&field, &problem.set, &start, solver)?;
    let doc = json!({
        "problem": problem.name,
        "xi": xi.weights(),
        "status": outcome.status,
        "point": outcome.point,
        "residual": outcome.residual,
        "iterations": outcome.iterations,
        "steps": outcome.steps,
    });
    emit(g.out.as_deref(), &serde_json::to_string_pretty(&doc)?)?;
    Ok(if outcome.converged() { 0 } else { EXIT_FAILED })
}

fn cmd_sweep(
    g: &Global,
    solver: &SolverOptions,
    problem: &str,
    resolution: usize,
    margin: f64,
    starts: usize,
) -> Result<u8> {
    let problem = load_problem(problem)?;
    let grid = simplex_grid(problem.m(), resolution, margin)?;
    let opts = SweepOptions {
        starts,
        seed: g.seed,
        solver: *solver,
        ..Default::default()
    };
    let cloud = sweep(&problem, &grid, &opts)?;
    emit(g.out.as_deref(), &cloud.to_csv_string()?)?;
    Ok(0)
}

fn cmd_verify(g: &Global, solver: &SolverOptions, name: &str, resolution: usize) -> Result<u8> {
    let oracle: fn(f64) -> vvi_core::Result<Option<[f64; 2]>> = match name {
        "example-q" => |t| catalog::closed_form_q(t).map(Some),
        "example-p" => catalog::closed_form_p,
        _ => bail!("verify-example supports example-q and example-p, not `{name}`"),
    };
    let problem = catalog::resolve(name)?;
    let grid = simplex_grid(2, resolution, 0.0)?;
    let opts = SweepOptions {
        starts: 1,
        seed: g.seed,
        solver: *solver,
        execution: Execution::Parallel,
        ..Default::default()
    };
    let cloud = sweep(&problem, &grid, &opts)?;
    let mut worst: f64 = 0.0;
    let mut table = String::from("xi_1        status          error\n");
    let mut plot = String::from("x_1,x_2\n");
    for s in &cloud.samples {
        let t = s.xi.weights()[0];
        let status = s.outcome.status.as_str();
        match oracle(t)? {
            None => table.push_str(&format!("{t:<11} {status:<15} (no solution)\n")),
            Some(x) => {
                let err = if s.outcome.converged() {
                    vvi_core::linalg::dist(&s.outcome.point, &x)
                } else {
                    f64::INFINITY
                };
                worst = worst.max(err);
                table.push_str(&format!("{t:<11} {status:<15} {err:.3e}\n"));
            }
        }
        if s.outcome.converged() {
            plot.push_str(&format!("{},{}\n", s.outcome.point[0], s.outcome.point[1]));
        }
    }
    let pass = worst <= 1e-6;
    table.push_str(&format!(
        "max error {worst:.3e} ({})\n",
        if pass { "ok" } else { "FAILED" }
    ));
    print!("{table}");
    let plot_path = g
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{name}-plot.csv")));
    fs::write(&plot_path, plot).with_context(|| format!("writing {}", plot_path.display()))?;
    eprintln!("plot data written to {}", plot_path.display());
    Ok(if pass { 0 } else { EXIT_FAILED })
}
