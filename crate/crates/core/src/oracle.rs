//! Slow reference solvers and optimality checks.
//!
//! Nothing here calls into the fast solvers: marginals are recomputed with
//! plain loops so that agreement between the two is meaningful.

use nalgebra::DMatrix;

use crate::error::{Result, UotError};
use crate::problem::{Problem, TransportPlan};

/// Explicit `(n + m) × nm` design matrix; guarded to `n·m ≤ 10000`.
pub fn dense_design(n: usize, m: usize) -> Result<DMatrix<f64>> {
    if n * m > 10_000 {
        return Err(UotError::Precondition(format!("dense design limited to n*m <= 10000, got {}", n * m)));
    }
    let mut h = DMatrix::zeros(n + m, n * m);
    for i in 0..n {
        for j in 0..m {
            h[(i, i * m + j)] = 1.0;
            h[(n + j, i * m + j)] = 1.0;
        }
    }
    Ok(h)
}

fn marginals(t: &[f64], n: usize, m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut r = vec![0.0; n];
    let mut s = vec![0.0; m];
    for i in 0..n {
        for j in 0..m {
            r[i] += t[i * m + j];
            s[j] += t[i * m + j];
        }
    }
    (r, s)
}

/// Output of an iterative oracle.
#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub plan: TransportPlan,
    pub iterations: usize,
    /// Final value of the optimality measure the iteration stops on.
    pub residual: f64,
    pub converged: bool,
}

/// Gradient of `(1/λ)cᵀt + ½‖Ht − y‖²`.
fn full_gradient(problem: &Problem, lambda: f64, t: &[f64]) -> Vec<f64> {
    let (n, m) = (problem.n(), problem.m());
    let (r, s) = marginals(t, n, m);
    let (a, b, c) = (problem.a.as_slice(), problem.b.as_slice(), problem.cost.as_slice());
    let mut g = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            g[i * m + j] = c[i * m + j] / lambda + (r[i] - a[i]) + (s[j] - b[j]);
        }
    }
    g
}

/// Accelerated projected gradient with restart. `project` maps a point to the
/// feasible set in place and `step` is `1/L`. Stops when the gradient-mapping
/// norm `‖t − P(t − step·∇)‖∞ / step` drops below `tol`.
fn accelerated_projected_gradient(
    start: Vec<f64>,
    step: f64,
    tol: f64,
    max_iters: usize,
    grad: impl Fn(&[f64]) -> Vec<f64>,
    project: impl Fn(&mut [f64]),
) -> (Vec<f64>, usize, f64, bool) {
    let mut x = start;
    let mut y = x.clone();
    let mut theta = 1.0f64;
    let mut residual = f64::INFINITY;
    for it in 0..max_iters {
        let gx = grad(&x);
        let mut px: Vec<f64> = x.iter().zip(&gx).map(|(v, g)| v - step * g).collect();
        project(&mut px);
        residual = x.iter().zip(&px).fold(0.0f64, |s, (a, b)| s.max((a - b).abs())) / step;
        if residual <= tol {
            return (x, it, residual, true);
        }
        let gy = grad(&y);
        let mut next: Vec<f64> = y.iter().zip(&gy).map(|(v, g)| v - step * g).collect();
        project(&mut next);
        // Momentum restart when the step opposes the previous displacement.
        let opposed: f64 = y.iter().zip(&next).zip(&x).map(|((y, n), o)| (y - n) * (n - o)).sum();
        if opposed > 0.0 {
            theta = 1.0;
            y = next.clone();
        } else {
            let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
            let momentum = (theta - 1.0) / theta_next;
            y = next.iter().zip(&x).map(|(n, o)| n + momentum * (n - o)).collect();
            theta = theta_next;
        }
        x = next;
    }
    (x, max_iters, residual, false)
}

/// Minimizes `(1/λ)cᵀt + ½‖Ht − y‖²` over `t ≥ 0` with step `1/(n + m)`.
pub fn projected_gradient_l2(problem: &Problem, lambda: f64, tol: f64, max_iters: usize) -> Result<OracleSolution> {
    if !(lambda > 0.0) {
        return Err(UotError::Domain(format!("lambda must be positive, got {lambda}")));
    }
    let (n, m) = (problem.n(), problem.m());
    let step = 1.0 / (n + m) as f64;
    let (t, iterations, residual, converged) = accelerated_projected_gradient(
        vec![0.0; n * m],
        step,
        tol,
        max_iters,
        |t| full_gradient(problem, lambda, t),
        |t| t.iter_mut().for_each(|v| *v = v.max(0.0)),
    );
    Ok(OracleSolution {
        plan: TransportPlan::from_clamped(n, m, t),
        iterations,
        residual,
        converged,
    })
}

/// Euclidean projection of `v` onto `{x ≥ 0, Σx = mass}`.
fn project_scaled_simplex(v: &mut [f64], mass: f64) {
    let mut sorted: Vec<f64> = v.to_vec();
    sorted.sort_by(|x, y| y.total_cmp(x));
    let mut cumulative = 0.0;
    let mut shift = sorted[0] - mass;
    for (k, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - mass) / (k + 1) as f64;
        if u - candidate > 0.0 {
            shift = candidate;
        }
    }
    v.iter_mut().for_each(|x| *x = (*x - shift).max(0.0));
}

/// Semi-relaxed counterpart: columns are constrained to sum to `b_j` exactly.
pub fn projected_gradient_semi_relaxed(
    problem: &Problem,
    lambda: f64,
    tol: f64,
    max_iters: usize,
) -> Result<OracleSolution> {
    if !(lambda > 0.0) {
        return Err(UotError::Domain(format!("lambda must be positive, got {lambda}")));
    }
    let (n, m) = (problem.n(), problem.m());
    let (a, b, c) = (problem.a.as_slice(), problem.b.as_slice(), problem.cost.as_slice());
    let project = |t: &mut [f64]| {
        let mut col = vec![0.0; n];
        for j in 0..m {
            for i in 0..n {
                col[i] = t[i * m + j];
            }
            project_scaled_simplex(&mut col, b[j]);
            for i in 0..n {
                t[i * m + j] = col[i];
            }
        }
    };
    let grad = |t: &[f64]| {
        let (r, _) = marginals(t, n, m);
        let mut g = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                g[i * m + j] = c[i * m + j] / lambda + r[i] - a[i];
            }
        }
        g
    };
    let mut start = vec![0.0; n * m];
    for j in 0..m {
        for i in 0..n {
            start[i * m + j] = b[j] / n as f64;
        }
    }
    let (t, iterations, residual, converged) =
        accelerated_projected_gradient(start, 1.0 / m as f64, tol, max_iters, grad, project);
    Ok(OracleSolution {
        plan: TransportPlan::from_clamped(n, m, t),
        iterations,
        residual,
        converged,
    })
}

/// Exact balanced OT by enumerating every spanning-tree basis. Requires `n·m ≤ 16`.
pub fn balanced_ot_bruteforce(problem: &Problem) -> Result<(f64, TransportPlan)> {
    let (n, m) = (problem.n(), problem.m());
    if n * m > 16 {
        return Err(UotError::Precondition(format!("brute-force LP limited to n*m <= 16, got {}", n * m)));
    }
    let (sa, sb) = (problem.a.total_mass(), problem.b.total_mass());
    if (sa - sb).abs() > 1e-12 * sa.max(sb) {
        return Err(UotError::Precondition(format!("masses differ: {sa} vs {sb}")));
    }
    let cells = n * m;
    let basis = n + m - 1;
    let c = problem.cost.as_slice();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1u32 << cells) {
        if mask.count_ones() as usize != basis {
            continue;
        }
        let Some(t) = tree_solution(mask, problem) else {
            continue;
        };
        let cost: f64 = t.iter().zip(c).map(|(x, y)| x * y).sum();
        if best.as_ref().is_none_or(|(bc, _)| cost < *bc) {
            best = Some((cost, t));
        }
    }
    let (cost, t) = best.ok_or_else(|| UotError::Degenerate("no feasible basis".into()))?;
    Ok((cost, TransportPlan::from_clamped(n, m, t)))
}

/// Solves the transportation equalities on the cells of `mask` by peeling
/// leaves. `None` when the cells do not form a spanning tree or the solution
/// is negative.
fn tree_solution(mask: u32, problem: &Problem) -> Option<Vec<f64>> {
    let (n, m) = (problem.n(), problem.m());
    let mut open: Vec<bool> = (0..n * m).map(|k| mask >> k & 1 == 1).collect();
    let mut row_left = problem.a.as_slice().to_vec();
    let mut col_left = problem.b.as_slice().to_vec();
    let mut t = vec![0.0; n * m];
    let scale = row_left.iter().chain(&col_left).fold(0.0f64, |s, v| s.max(*v));
    let mut remaining = n + m - 1;
    while remaining > 0 {
        let mut progressed = false;
        for i in 0..n {
            let cells: Vec<usize> = (0..m).filter(|&j| open[i * m + j]).collect();
            if cells.len() == 1 {
                let j = cells[0];
                t[i * m + j] = row_left[i];
                col_left[j] -= row_left[i];
                row_left[i] = 0.0;
                open[i * m + j] = false;
                remaining -= 1;
                progressed = true;
            }
        }
        for j in 0..m {
            let cells: Vec<usize> = (0..n).filter(|&i| open[i * m + j]).collect();
            if cells.len() == 1 {
                let i = cells[0];
                t[i * m + j] = col_left[j];
                row_left[i] -= col_left[j];
                col_left[j] = 0.0;
                open[i * m + j] = false;
                remaining -= 1;
                progressed = true;
            }
        }
        if !progressed {
            return None;
        }
    }
    let tol = 1e-12 * scale.max(1.0);
    let consistent = row_left.iter().chain(&col_left).all(|v| v.abs() <= tol);
    (consistent && t.iter().all(|&v| v >= -tol)).then(|| t.into_iter().map(|v| v.max(0.0)).collect())
}

/// Which optimality system [`kkt_check`] verifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KktKind {
    Full,
    SemiRelaxed,
}

/// Violations of the optimality conditions; all non-negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResidual {
    /// Largest `|γ|` on the support.
    pub stationarity_active: f64,
    /// Most negative `γ` off the support, negated (0 when feasible).
    pub dual_feasibility: f64,
    /// Largest `|γ t|`.
    pub complementarity: f64,
    /// `‖Tᵀ1 − b‖∞` for the semi-relaxed problem, 0 otherwise.
    pub primal_feasibility: f64,
}

impl KktResidual {
    pub fn max(&self) -> f64 {
        self.stationarity_active
            .max(self.dual_feasibility)
            .max(self.complementarity)
            .max(self.primal_feasibility)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

/// Evaluates the optimality conditions of `plan` at `lambda`.
///
/// An entry counts as active when it is positive and at least its multiplier
/// `γ`, so `min(t, γ)` decides which residual it feeds.
pub fn kkt_check(kind: KktKind, plan: &TransportPlan, lambda: f64, problem: &Problem) -> Result<KktResidual> {
    let (n, m) = (problem.n(), problem.m());
    if plan.rows() != n || plan.cols() != m {
        return Err(UotError::Dimension {
            what: "plan for optimality check",
            expected: n * m,
            got: plan.rows() * plan.cols(),
        });
    }
    if !(lambda > 0.0) {
        return Err(UotError::Domain(format!("lambda must be positive, got {lambda}")));
    }
    let t = plan.as_slice();
    if let Some(k) = t.iter().position(|&v| v < 0.0) {
        return Err(UotError::validation("plan", Some(k), "entries must be non-negative"));
    }
    let (r, s) = marginals(t, n, m);
    let (a, b, c) = (problem.a.as_slice(), problem.b.as_slice(), problem.cost.as_slice());
    let mut gamma = vec![0.0; n * m];
    let mut primal = 0.0f64;
    match kind {
        KktKind::Full => {
            for i in 0..n {
                for j in 0..m {
                    gamma[i * m + j] = c[i * m + j] / lambda + (r[i] - a[i]) + (s[j] - b[j]);
                }
            }
        }
        KktKind::SemiRelaxed => {
            for j in 0..m {
                let g: Vec<f64> = (0..n).map(|i| c[i * m + j] / lambda + r[i] - a[i]).collect();
                let support: Vec<usize> = (0..n).filter(|&i| t[i * m + j] > 0.0).collect();
                let u = if support.is_empty() {
                    -g.iter().copied().fold(f64::INFINITY, f64::min)
                } else {
                    -support.iter().map(|&i| g[i]).sum::<f64>() / support.len() as f64
                };
                for i in 0..n {
                    gamma[i * m + j] = g[i] + u;
                }
                primal = primal.max((s[j] - b[j]).abs());
            }
        }
    }
    let mut res = KktResidual {
        stationarity_active: 0.0,
        dual_feasibility: 0.0,
        complementarity: 0.0,
        primal_feasibility: primal,
    };
    // An entry smaller than its own multiplier is read as a zero that has not
    // fully decayed: iterative solvers only reach exact zeros in the limit.
    // Its violation then shows up through `|γ t|` instead.
    for (&g, &x) in gamma.iter().zip(t) {
        if x > 0.0 && x >= g {
            res.stationarity_active = res.stationarity_active.max(g.abs());
        } else {
            res.dual_feasibility = res.dual_feasibility.max(-g);
        }
        res.complementarity = res.complementarity.max((g * x).abs());
    }
    Ok(res)
}
