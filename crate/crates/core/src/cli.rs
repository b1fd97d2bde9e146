//! Command-line front end. [`run`] parses arguments, dispatches to the
//! library and returns the process exit code:
//!
//! | code | meaning                                            |
//! |------|----------------------------------------------------|
//! | 0    | success                                            |
//! | 1    | `check` found a residual above its tolerance       |
//! | 2    | iteration limit or segment limit reached           |
//! | 64   | invalid command line                               |
//! | 65   | invalid input data or a failed precondition        |

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{fit_exponent, run_scaling, run_scaling_parallel, write_csv, BenchSolver};
use crate::divergence::{Penalty, PenaltyWeights};
use crate::error::UotError;
use crate::ioformat::{self, Metric};
use crate::mm::{ipot_solve, solve_mm, IpotConfig, MmConfig, MmUpdate};
use crate::oracle::{kkt_check, KktKind};
use crate::path::{LambdaValue, PathKind};
use crate::problem::TransportPlan;
use crate::regpath::{compute_path, PathOptions};
use crate::srpath::compute_sr_path;
use crate::synth::{gaussian_problem, GaussianSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;

/// Residual tolerance used by `check`.
pub const CHECK_TOL: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "uot", version, about = "Unbalanced optimal transport solvers and regularization paths")]
struct Cli {
    /// Seed for every random choice (problem generation, benchmarks).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve at a fixed lambda with a multiplicative or proximal-point method.
    Solve(SolveArgs),
    /// Compute the exact regularization path.
    Path(PathArgs),
    /// Evaluate a stored path at one lambda.
    EvalPath(EvalPathArgs),
    /// Generate a Gaussian point-cloud problem.
    MakeProblem(MakeProblemArgs),
    /// Time a solver over increasing sizes and fit a power law.
    Bench(BenchArgs),
    /// Check the optimality conditions of a plan.
    Check(CheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    MmKl,
    MmL2,
    MmL2Alt,
    MmRuot,
    Ipot,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long)]
    problem: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    method: Method,
    #[arg(long)]
    lambda: Option<f64>,
    /// Row-marginal weight for mm-ruot; accepts `inf`.
    #[arg(long)]
    lambda1: Option<LambdaValue>,
    /// Column-marginal weight for mm-ruot; accepts `inf`.
    #[arg(long)]
    lambda2: Option<LambdaValue>,
    #[arg(long)]
    lambda_reg: Option<f64>,
    /// Relative objective decrease below which the iterations stop.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Also wait until no plan entry moves by more than this in one step.
    #[arg(long)]
    plan_tol: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    max_iters: usize,
}

#[derive(Debug, Args)]
struct PathArgs {
    #[arg(long)]
    problem: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Keep the column marginals as exact constraints.
    #[arg(long)]
    semi_relaxed: bool,
    #[arg(long, default_value_t = 100_000)]
    max_segments: usize,
    /// Breakpoints CSV; defaults to the output path with extension `breakpoints.csv`.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalPathArgs {
    #[arg(long)]
    path: PathBuf,
    /// Positive number or `inf`.
    #[arg(long, allow_hyphen_values = true)]
    lambda: LambdaValue,
    #[arg(long)]
    out: PathBuf,
    /// The problem the path was computed for; enables cost and objective output.
    #[arg(long)]
    problem: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MakeProblemArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, value_enum, default_value_t = MetricArg::Sqeuclidean)]
    metric: MetricArg,
    #[arg(long, default_value_t = 0)]
    outliers: usize,
    #[arg(long, default_value_t = 10.0)]
    outlier_shift: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MetricArg {
    Sqeuclidean,
    Euclidean,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// path, sr-path, mm-l2 or mm-kl.
    #[arg(long, default_value = "path")]
    solver: String,
    /// Comma-separated ascending sizes (n = m).
    #[arg(long, value_delimiter = ',', default_value = "20,40,60,80,100")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    /// Lambda for the fixed-lambda solvers.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Run sizes concurrently (timings become unreliable).
    #[arg(long)]
    parallel: bool,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[arg(long)]
    problem: PathBuf,
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    semi_relaxed: bool,
}

enum Failure {
    Usage(String),
    Data(UotError),
}

impl From<UotError> for Failure {
    fn from(e: UotError) -> Self {
        Failure::Data(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Data(e.into())
    }
}

type Outcome = std::result::Result<i32, Failure>;

/// Runs the command line `args` (program name first), printing to `out` and `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let target: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    let seed = cli.seed;
    let outcome = match cli.command {
        Command::Solve(a) => solve(a, out),
        Command::Path(a) => path(a, out),
        Command::EvalPath(a) => eval_path(a, out),
        Command::MakeProblem(a) => make_problem(a, seed, out),
        Command::Bench(a) => bench(a, seed, out, err),
        Command::Check(a) => check(a, out),
    };
    match outcome {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Data(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_DATA
        }
    }
}

fn penalty(value: LambdaValue) -> Penalty {
    match value {
        LambdaValue::Finite(v) => Penalty::Finite(v),
        LambdaValue::Infinite => Penalty::Infinite,
    }
}

fn marginal_errors(plan: &TransportPlan, a: &[f64], b: &[f64]) -> (f64, f64) {
    let err = |sums: Vec<f64>, target: &[f64]| sums.iter().zip(target).fold(0.0f64, |s, (x, y)| s.max((x - y).abs()));
    (err(plan.row_sums(), a), err(plan.col_sums(), b))
}

fn solve(args: SolveArgs, out: &mut dyn Write) -> Outcome {
    let uses_weights = args.lambda1.is_some() || args.lambda2.is_some() || args.lambda_reg.is_some();
    let lambda = match (args.method, args.lambda, uses_weights) {
        (Method::MmRuot, None, _) => None,
        (Method::MmRuot, Some(_), _) => return Err(Failure::Usage("mm-ruot takes --lambda1, --lambda2 and --lambda-reg, not --lambda".into())),
        (_, _, true) => return Err(Failure::Usage("--lambda1/--lambda2/--lambda-reg only apply to mm-ruot".into())),
        (_, None, _) => return Err(Failure::Usage("--lambda is required for this method".into())),
        (_, Some(l), _) => Some(l),
    };
    let problem = ioformat::load_problem(&args.problem)?;
    let config = MmConfig {
        max_iters: args.max_iters,
        rel_tol: args.tol,
        plan_tol: args.plan_tol,
        ..MmConfig::default()
    };
    let (plan, iterations, objective, converged) = match args.method {
        Method::Ipot => {
            let lambda = lambda.expect("checked above");
            let plan = ipot_solve(&problem, &IpotConfig::new(lambda, args.max_iters))?;
            let cost = plan.cost(&problem.cost);
            (plan, args.max_iters, cost, true)
        }
        method => {
            let update = match (method, lambda) {
                (Method::MmKl, Some(lambda)) => MmUpdate::Kl { lambda },
                (Method::MmL2, Some(lambda)) => MmUpdate::L2 { lambda },
                (Method::MmL2Alt, Some(lambda)) => MmUpdate::L2Alt { lambda },
                _ => {
                    let (Some(l1), Some(l2), Some(reg)) = (args.lambda1, args.lambda2, args.lambda_reg) else {
                        return Err(Failure::Usage("mm-ruot needs --lambda1, --lambda2 and --lambda-reg".into()));
                    };
                    let weights = PenaltyWeights {
                        lambda1: penalty(l1),
                        lambda2: penalty(l2),
                        lambda_reg: reg,
                    };
                    weights.validate()?;
                    MmUpdate::Ruot { weights }
                }
            };
            let report = solve_mm(&problem, update, &config)?;
            (report.plan, report.iterations, report.final_objective, report.converged)
        }
    };
    ioformat::save_plan(&args.out, &plan)?;
    let (row_err, col_err) = marginal_errors(&plan, problem.a.as_slice(), problem.b.as_slice());
    writeln!(out, "objective = {objective}")?;
    writeln!(out, "iterations = {iterations}")?;
    writeln!(out, "row_marginal_error = {row_err}")?;
    writeln!(out, "col_marginal_error = {col_err}")?;
    writeln!(out, "converged = {converged}")?;
    Ok(if converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn default_csv(out: &Path) -> PathBuf {
    out.with_extension("breakpoints.csv")
}

fn path(args: PathArgs, out: &mut dyn Write) -> Outcome {
    if args.max_segments == 0 {
        return Err(Failure::Usage("--max-segments must be at least 1".into()));
    }
    let problem = ioformat::load_problem(&args.problem)?;
    let options = PathOptions {
        max_segments: args.max_segments,
        ..PathOptions::default()
    };
    let path = if args.semi_relaxed {
        compute_sr_path(&problem, &options)?
    } else {
        compute_path(&problem, &options)?
    };
    ioformat::export_path(&args.out, &path, &problem)?;
    let csv_path = args.csv.unwrap_or_else(|| default_csv(&args.out));
    ioformat::write_breakpoints_csv(fs::File::create(&csv_path)?, &path, &problem)?;
    writeln!(out, "kind = {}", path.kind.as_str())?;
    writeln!(out, "segments = {}", path.segments.len())?;
    writeln!(out, "complete = {}", path.complete)?;
    writeln!(out, "terminal_balanced = {}", path.terminal_balanced)?;
    writeln!(out, "coincident_events = {}", path.coincident_events)?;
    writeln!(out, "breakpoints_csv = {}", csv_path.display())?;
    Ok(if path.complete { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn eval_path(args: EvalPathArgs, out: &mut dyn Write) -> Outcome {
    let imported = ioformat::import_path(&args.path)?;
    let problem = match &args.problem {
        Some(file) => {
            let problem = ioformat::load_problem(file)?;
            imported.check_problem(&problem)?;
            Some(problem)
        }
        None => None,
    };
    let path = &imported.path;
    let plan = path.eval(args.lambda)?;
    ioformat::save_plan(&args.out, &plan)?;
    writeln!(out, "lambda = {}", args.lambda)?;
    writeln!(out, "total_mass = {}", plan.total_mass())?;
    if let Some(problem) = problem {
        writeln!(out, "cost = {}", plan.cost(&problem.cost))?;
        if let LambdaValue::Finite(l) = args.lambda {
            writeln!(out, "objective = {}", path.objective_at(&problem, l)?)?;
        }
        let (row_err, col_err) = marginal_errors(&plan, problem.a.as_slice(), problem.b.as_slice());
        writeln!(out, "row_marginal_error = {row_err}")?;
        writeln!(out, "col_marginal_error = {col_err}")?;
    }
    Ok(EXIT_OK)
}

fn make_problem(args: MakeProblemArgs, seed: u64, out: &mut dyn Write) -> Outcome {
    if args.n == 0 || args.m == 0 || args.dim == 0 {
        return Err(Failure::Usage("--n, --m and --dim must be at least 1".into()));
    }
    if args.outliers > args.m {
        return Err(Failure::Usage("--outliers cannot exceed --m".into()));
    }
    let mut spec = GaussianSpec::new(args.n, args.m, args.dim, seed).with_outliers(args.outliers, args.outlier_shift);
    spec.metric = match args.metric {
        MetricArg::Sqeuclidean => Metric::SqEuclidean,
        MetricArg::Euclidean => Metric::Euclidean,
    };
    let generated = gaussian_problem(&spec)?;
    ioformat::save_problem_file(&args.out, &generated.to_file())?;
    writeln!(out, "n = {}", args.n)?;
    writeln!(out, "m = {}", args.m)?;
    writeln!(out, "outliers = {:?}", generated.outliers)?;
    Ok(EXIT_OK)
}

fn bench(args: BenchArgs, seed: u64, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    let solver = match args.solver.parse::<BenchSolver>().map_err(|e| Failure::Usage(e.to_string()))? {
        BenchSolver::MmL2 { .. } => BenchSolver::MmL2 { lambda: args.lambda },
        BenchSolver::MmKl { .. } => BenchSolver::MmKl { lambda: args.lambda },
        other => other,
    };
    if args.repeats == 0 {
        return Err(Failure::Usage("--repeats must be at least 1".into()));
    }
    if args.sizes.is_empty() || args.sizes.windows(2).any(|w| w[0] > w[1]) || args.sizes[0] == 0 {
        return Err(Failure::Usage("--sizes must be positive and ascending".into()));
    }
    let records = if args.parallel {
        run_scaling_parallel(solver, &args.sizes, args.repeats, seed)?
    } else {
        run_scaling(solver, &args.sizes, args.repeats, seed)?
    };
    let summary: &mut dyn Write = match &args.out {
        Some(file) => {
            write_csv(fs::File::create(file)?, &records)?;
            out
        }
        None => {
            write_csv(&mut *out, &records)?;
            err
        }
    };
    let failures = records.iter().filter(|r| !r.ok()).count();
    if failures > 0 {
        writeln!(summary, "failed_runs = {failures}")?;
    }
    match fit_exponent(&records) {
        Ok((exponent, r2)) => {
            writeln!(summary, "exponent = {exponent}")?;
            writeln!(summary, "r_squared = {r2}")?;
        }
        Err(e) => writeln!(summary, "fit skipped: {e}")?,
    }
    Ok(EXIT_OK)
}

fn check(args: CheckArgs, out: &mut dyn Write) -> Outcome {
    let problem = ioformat::load_problem(&args.problem)?;
    let plan = ioformat::load_plan(&args.plan)?;
    if !(args.lambda > 0.0) || !args.lambda.is_finite() {
        return Err(UotError::Domain(format!("lambda must be positive and finite, got {}", args.lambda)).into());
    }
    let kind = if args.semi_relaxed { KktKind::SemiRelaxed } else { KktKind::Full };
    let r = kkt_check(kind, &plan, args.lambda, &problem)?;
    writeln!(out, "kind = {}", if args.semi_relaxed { PathKind::SemiRelaxed } else { PathKind::Full }.as_str())?;
    writeln!(out, "stationarity_active = {}", r.stationarity_active)?;
    writeln!(out, "dual_feasibility = {}", r.dual_feasibility)?;
    writeln!(out, "complementarity = {}", r.complementarity)?;
    writeln!(out, "primal_feasibility = {}", r.primal_feasibility)?;
    let pass = r.passes(CHECK_TOL);
    writeln!(out, "pass = {pass}")?;
    Ok(if pass { EXIT_OK } else { EXIT_CHECK_FAILED })
}
