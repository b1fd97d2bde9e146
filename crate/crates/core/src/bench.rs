//! Wall-clock scaling runs and a log-log power-law fit.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Result, UotError};
use crate::mm::{solve_mm, MmConfig, MmUpdate};
use crate::path::LambdaValue;
use crate::problem::Problem;
use crate::regpath::{compute_path, PathOptions};
use crate::srpath::compute_sr_path;
use crate::synth::{gaussian_problem, GaussianSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BenchSolver {
    Path,
    SrPath,
    MmL2 { lambda: f64 },
    MmKl { lambda: f64 },
}

impl BenchSolver {
    pub fn id(&self) -> &'static str {
        match self {
            BenchSolver::Path => "path",
            BenchSolver::SrPath => "sr-path",
            BenchSolver::MmL2 { .. } => "mm-l2",
            BenchSolver::MmKl { .. } => "mm-kl",
        }
    }

    pub fn lambda(&self) -> Option<f64> {
        match *self {
            BenchSolver::MmL2 { lambda } | BenchSolver::MmKl { lambda } => Some(lambda),
            _ => None,
        }
    }

    /// Solves `problem`, returning the timed duration in seconds, the
    /// iteration or segment count, and the final objective.
    fn run(&self, problem: &Problem) -> Result<(f64, usize, f64)> {
        match *self {
            BenchSolver::Path | BenchSolver::SrPath => {
                let start = Instant::now();
                let path = if *self == BenchSolver::Path {
                    compute_path(problem, &PathOptions::default())?
                } else {
                    compute_sr_path(problem, &PathOptions::default())?
                };
                let elapsed = start.elapsed().as_secs_f64();
                let cost = path.eval(LambdaValue::Infinite)?.cost(&problem.cost);
                Ok((elapsed, path.segments.len(), cost))
            }
            BenchSolver::MmL2 { lambda } | BenchSolver::MmKl { lambda } => {
                let update = match self {
                    BenchSolver::MmL2 { .. } => MmUpdate::L2 { lambda },
                    _ => MmUpdate::Kl { lambda },
                };
                let start = Instant::now();
                let report = solve_mm(problem, update, &MmConfig::default())?;
                let elapsed = start.elapsed().as_secs_f64();
                Ok((elapsed, report.iterations, report.final_objective))
            }
        }
    }
}

impl fmt::Display for BenchSolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

/// Parses `path`, `sr-path`, `mm-l2` or `mm-kl`; the MM solvers take `lambda`.
impl FromStr for BenchSolver {
    type Err = UotError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "path" => Ok(BenchSolver::Path),
            "sr-path" => Ok(BenchSolver::SrPath),
            "mm-l2" => Ok(BenchSolver::MmL2 { lambda: 1.0 }),
            "mm-kl" => Ok(BenchSolver::MmKl { lambda: 1.0 }),
            other => Err(UotError::Domain(format!("unknown solver `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub solver: String,
    pub n: usize,
    pub m: usize,
    pub lambda: Option<f64>,
    pub repeat: usize,
    pub wall_time_s: f64,
    pub iters: usize,
    pub objective: Option<f64>,
    /// Set when the run failed; timings are then meaningless.
    pub error: Option<String>,
}

impl BenchRecord {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

/// The benchmark problem for one size: seeded Gaussian clouds in 2D.
pub fn bench_problem(size: usize, seed: u64) -> Result<Problem> {
    let seed = seed.wrapping_mul(1_000_003).wrapping_add(size as u64);
    Ok(gaussian_problem(&GaussianSpec::new(size, size, 2, seed))?.problem)
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.is_empty() || sizes.windows(2).any(|w| w[0] > w[1]) || sizes[0] == 0 {
        return Err(UotError::Domain("sizes must be positive and sorted ascending".into()));
    }
    Ok(())
}

fn run_size(solver: BenchSolver, size: usize, repeats: usize, seed: u64) -> Vec<BenchRecord> {
    let problem = bench_problem(size, seed);
    (0..repeats)
        .map(|repeat| {
            let outcome = problem.as_ref().map_err(|e| e.to_string()).and_then(|p| solver.run(p).map_err(|e| e.to_string()));
            let mut record = BenchRecord {
                solver: solver.id().into(),
                n: size,
                m: size,
                lambda: solver.lambda(),
                repeat,
                wall_time_s: 0.0,
                iters: 0,
                objective: None,
                error: None,
            };
            match outcome {
                Ok((time, iters, objective)) => {
                    // Clock resolution can report zero for tiny problems.
                    record.wall_time_s = time.max(1e-9);
                    record.iters = iters;
                    record.objective = Some(objective);
                }
                Err(e) => record.error = Some(e),
            }
            record
        })
        .collect()
}

/// One record per `(size, repeat)`, run serially; failures are recorded, not raised.
pub fn run_scaling(solver: BenchSolver, sizes: &[usize], repeats: usize, seed: u64) -> Result<Vec<BenchRecord>> {
    check_sizes(sizes)?;
    Ok(sizes.iter().flat_map(|&s| run_size(solver, s, repeats, seed)).collect())
}

/// Like [`run_scaling`] with one thread per size. Timings contend for cores,
/// so use it for correctness sweeps only.
pub fn run_scaling_parallel(solver: BenchSolver, sizes: &[usize], repeats: usize, seed: u64) -> Result<Vec<BenchRecord>> {
    check_sizes(sizes)?;
    let chunks = std::thread::scope(|scope| {
        let handles: Vec<_> = sizes
            .iter()
            .map(|&s| scope.spawn(move || run_size(solver, s, repeats, seed)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("bench thread panicked")).collect::<Vec<_>>()
    });
    Ok(chunks.into_iter().flatten().collect())
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let k = values.len();
    if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}

/// Least-squares slope of `log(median time)` against `log n`, and its `r²`.
/// A flat series has slope 0 and `r² = 1`.
pub fn fit_exponent(records: &[BenchRecord]) -> Result<(f64, f64)> {
    let mut sizes: Vec<usize> = records.iter().filter(|r| r.ok()).map(|r| r.n).collect();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 4 {
        return Err(UotError::Domain(format!("need at least 4 distinct sizes, got {}", sizes.len())));
    }
    let points: Vec<(f64, f64)> = sizes
        .iter()
        .map(|&n| {
            let mut times: Vec<f64> = records.iter().filter(|r| r.ok() && r.n == n).map(|r| r.wall_time_s).collect();
            ((n as f64).ln(), median(&mut times).ln())
        })
        .collect();
    if points.iter().any(|p| !p.1.is_finite()) {
        return Err(UotError::Domain("wall times must be positive".into()));
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let sse: f64 = points.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
    let r2 = if syy <= 1e-300 { 1.0 } else { 1.0 - sse / syy };
    Ok((slope, r2))
}

/// CSV with header `solver,n,m,lambda,repeat,wall_time_s,iters,objective,error`.
pub fn write_csv<W: Write>(out: W, records: &[BenchRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for r in records {
        writer.serialize(r).map_err(|e| UotError::Parse(format!("csv: {e}")))?;
    }
    writer.flush()?;
    Ok(())
}
