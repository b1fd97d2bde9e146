//! Majorization-minimization solvers.
//!
//! Every update here multiplies the current plan entrywise by a non-negative
//! factor, so zero entries stay zero and each step does `O(n m)` work:
//!
//! * [`mm_kl_step`]: KL-penalized UOT, a simultaneous two-sided Sinkhorn-like scaling
//!   `T' = diag(a / T1)^(1/2) (T * exp(-C / 2lambda)) diag(b / T^T 1)^(1/2)`.
//! * [`mm_l2_step`]: l2-penalized UOT, `T' = T * max(0, a_i + b_j - C/lambda) / (r_i + s_j)`.
//!   Entries whose threshold is negative are pruned on the first iteration.
//! * [`mm_l2_alt_step`]: threshold-free l2 variant (quadratic bound on the linear term).
//! * [`mm_ruot_step`]: KL penalties with separate weights and an entropic term.
//!
//! [`ipot_solve`] runs inexact proximal point iterations for balanced OT, which
//! is the same kernel-times-plan construction seen as MM.

use crate::divergence::{objective, objective_regularized, DivergenceKind, Penalty, PenaltyWeights};
use crate::error::{Result, UotError};
use crate::problem::{Problem, TransportPlan};

/// Starting plan for the multiplicative iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MmInit {
    /// `T0_ij = a_i b_j / ||b||_1`: positive wherever both masses are, rows carry mass `a`.
    #[default]
    OuterProduct,
    /// Constant plan of total mass `||a||_1`, restricted to rows and columns with mass.
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmConfig {
    pub max_iters: usize,
    /// Stop once `|F_k - F_{k+1}| <= rel_tol * |F_k|`.
    pub rel_tol: f64,
    /// When set, convergence also needs the largest entry change of the last
    /// step to be at most this. The objective stalls in floating point long
    /// before entries that decay towards zero get there.
    pub plan_tol: Option<f64>,
    pub init: MmInit,
    pub record_trace: bool,
}

impl Default for MmConfig {
    fn default() -> Self {
        MmConfig {
            max_iters: 100_000,
            rel_tol: 1e-10,
            plan_tol: None,
            init: MmInit::OuterProduct,
            record_trace: false,
        }
    }
}

impl MmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(UotError::Domain("max_iters must be at least 1".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(UotError::Domain(format!("rel_tol must be positive, got {}", self.rel_tol)));
        }
        if let Some(tol) = self.plan_tol {
            if !(tol >= 0.0) {
                return Err(UotError::Domain(format!("plan_tol must be non-negative, got {tol}")));
            }
        }
        Ok(())
    }
}

/// Which multiplicative update to iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MmUpdate {
    Kl { lambda: f64 },
    L2 { lambda: f64 },
    /// Its fixed points minimize the l2 objective at `2 * lambda` (see [`mm_l2_alt_step`]).
    L2Alt { lambda: f64 },
    Ruot { weights: PenaltyWeights },
}

impl MmUpdate {
    /// The objective this update is guaranteed to decrease.
    pub fn objective(&self, plan: &TransportPlan, problem: &Problem) -> Result<f64> {
        match *self {
            MmUpdate::Kl { lambda } => objective(DivergenceKind::Kl, lambda, plan, problem),
            MmUpdate::L2 { lambda } => objective(DivergenceKind::QuadraticL2, lambda, plan, problem),
            MmUpdate::L2Alt { lambda } => objective(DivergenceKind::QuadraticL2, 2.0 * lambda, plan, problem),
            MmUpdate::Ruot { weights } => objective_regularized(DivergenceKind::Kl, &weights, plan, problem),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub plan: TransportPlan,
    pub iterations: usize,
    pub objective_trace: Option<Vec<f64>>,
    pub final_objective: f64,
    /// `(||T 1 - a||_inf, ||T^T 1 - b||_inf)`.
    pub marginal_errors: (f64, f64),
    pub converged: bool,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(UotError::Domain(format!("lambda must be positive and finite, got {lambda}")));
    }
    Ok(())
}

fn check_nonnegative(plan: &TransportPlan) -> Result<()> {
    if let Some(k) = plan.as_slice().iter().position(|&v| !(v >= 0.0)) {
        return Err(UotError::Precondition(format!("plan entry {k} is negative or NaN")));
    }
    Ok(())
}

/// `(target / achieved)^power`, with `0/0` giving zero (a massless row stays empty).
fn scaling(target: &[f64], achieved: &[f64], power: f64, what: &str) -> Result<Vec<f64>> {
    target
        .iter()
        .zip(achieved)
        .enumerate()
        .map(|(k, (&t, &s))| {
            if s > 0.0 {
                let ratio = t / s;
                Ok(if power == 0.5 { ratio.sqrt() } else { ratio.powf(power) })
            } else if t == 0.0 {
                Ok(0.0)
            } else {
                Err(UotError::Degenerate(format!("{what} {k} of the iterate sums to zero but carries mass {t}")))
            }
        })
        .collect()
}

fn kl_kernel(problem: &Problem, lambda: f64) -> Vec<f64> {
    problem.cost.as_slice().iter().map(|c| (-c / (2.0 * lambda)).exp()).collect()
}

fn kl_step_with(plan: &TransportPlan, problem: &Problem, kernel: &[f64]) -> Result<TransportPlan> {
    let m = problem.m();
    let row = scaling(problem.a.as_slice(), &plan.row_sums(), 0.5, "row")?;
    let col = scaling(problem.b.as_slice(), &plan.col_sums(), 0.5, "column")?;
    let mut out = plan.as_slice().to_vec();
    for (k, v) in out.iter_mut().enumerate() {
        if *v != 0.0 {
            *v = row[k / m] * (*v * kernel[k]) * col[k % m];
        }
    }
    Ok(TransportPlan::from_clamped(problem.n(), m, out))
}

/// One MM step for KL-penalized UOT at weight `lambda`.
pub fn mm_kl_step(plan: &TransportPlan, problem: &Problem, lambda: f64) -> Result<TransportPlan> {
    check_lambda(lambda)?;
    problem.check_plan(plan)?;
    check_nonnegative(plan)?;
    kl_step_with(plan, problem, &kl_kernel(problem, lambda))
}

fn l2_thresholds(problem: &Problem, lambda: f64) -> Vec<f64> {
    problem
        .mass_vector()
        .iter()
        .zip(problem.cost.as_slice())
        .map(|(mk, ck)| (mk - ck / lambda).max(0.0))
        .collect()
}

fn l2_step_with(plan: &TransportPlan, problem: &Problem, thresholds: &[f64]) -> Result<TransportPlan> {
    let m = problem.m();
    let (r, s) = (plan.row_sums(), plan.col_sums());
    let mut out = plan.as_slice().to_vec();
    for (k, v) in out.iter_mut().enumerate() {
        let num = thresholds[k];
        // a zero entry or a pruned threshold gives an exact zero, even for 0/0
        *v = if *v == 0.0 || num == 0.0 {
            0.0
        } else {
            *v * num / (r[k / m] + s[k % m])
        };
    }
    Ok(TransportPlan::from_clamped(problem.n(), m, out))
}

/// One MM step for l2-penalized UOT at weight `lambda`.
///
/// Every entry with `a_i + b_j - C_ij / lambda < 0` becomes exactly zero.
pub fn mm_l2_step(plan: &TransportPlan, problem: &Problem, lambda: f64) -> Result<TransportPlan> {
    check_lambda(lambda)?;
    problem.check_plan(plan)?;
    check_nonnegative(plan)?;
    l2_step_with(plan, problem, &l2_thresholds(problem, lambda))
}

fn l2_alt_step_with(plan: &TransportPlan, problem: &Problem, lambda: f64, masses: &[f64]) -> Result<TransportPlan> {
    let m = problem.m();
    let (r, s) = (plan.row_sums(), plan.col_sums());
    let c = problem.cost.as_slice();
    let mut out = plan.as_slice().to_vec();
    for (k, v) in out.iter_mut().enumerate() {
        let den = r[k / m] + s[k % m] + c[k] / (2.0 * lambda);
        if den == 0.0 {
            if *v == 0.0 && masses[k] == 0.0 {
                continue;
            }
            return Err(UotError::Degenerate(format!("zero denominator at flat index {k}")));
        }
        *v *= masses[k] / den;
    }
    Ok(TransportPlan::from_clamped(problem.n(), m, out))
}

/// Threshold-free l2 update `T' = T * (a_i + b_j) / (r_i + s_j + C_ij / (2 lambda))`.
///
/// Bounding the linear term `c t / (2 lambda)` by a quadratic tangent at the
/// current iterate gives this update, so its fixed points solve the l2 problem
/// at weight `2 lambda`, not `lambda`. It never creates zeros: entries outside
/// the optimal support only decay geometrically.
pub fn mm_l2_alt_step(plan: &TransportPlan, problem: &Problem, lambda: f64) -> Result<TransportPlan> {
    check_lambda(lambda)?;
    problem.check_plan(plan)?;
    check_nonnegative(plan)?;
    l2_alt_step_with(plan, problem, lambda, &problem.mass_vector())
}

struct RuotFactors {
    row_power: f64,
    col_power: f64,
    plan_power: f64,
    kernel: Vec<f64>,
}

fn ruot_factors(problem: &Problem, weights: &PenaltyWeights) -> Result<RuotFactors> {
    weights.validate()?;
    let (l1, l2) = match (weights.lambda1, weights.lambda2) {
        (Penalty::Finite(l1), Penalty::Finite(l2)) => (l1, l2),
        _ => {
            return Err(UotError::Domain(
                "the regularized MM update needs finite marginal weights".into(),
            ))
        }
    };
    let reg = weights.lambda_reg;
    let all = l1 + l2 + reg;
    let m = problem.m();
    let (a, b) = (problem.a.as_slice(), problem.b.as_slice());
    let kernel = problem
        .cost
        .as_slice()
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let e = (-c / all).exp();
            if reg > 0.0 {
                (a[k / m] * b[k % m]).powf(reg / all) * e
            } else {
                e
            }
        })
        .collect();
    Ok(RuotFactors {
        row_power: l1 / all,
        col_power: l2 / all,
        plan_power: (l1 + l2) / all,
        kernel,
    })
}

fn ruot_step_with(plan: &TransportPlan, problem: &Problem, f: &RuotFactors, reg: f64) -> Result<TransportPlan> {
    let m = problem.m();
    let row = scaling(problem.a.as_slice(), &plan.row_sums(), f.row_power, "row")?;
    let col = scaling(problem.b.as_slice(), &plan.col_sums(), f.col_power, "column")?;
    let mut out = plan.as_slice().to_vec();
    for (k, v) in out.iter_mut().enumerate() {
        if *v == 0.0 {
            continue;
        }
        if reg > 0.0 && problem.a[k / m] * problem.b[k % m] == 0.0 {
            return Err(UotError::Domain(format!(
                "entropic reference a_i b_j is zero on a positive plan entry at flat index {k}"
            )));
        }
        let p = if f.plan_power == 1.0 { *v } else { v.powf(f.plan_power) };
        *v = row[k / m] * (p * f.kernel[k]) * col[k % m];
    }
    Ok(TransportPlan::from_clamped(problem.n(), m, out))
}

/// One MM step for KL-penalized UOT with weights `(lambda1, lambda2, lambda_reg)`:
/// `T' = diag(a/T1)^(l1/L) (T^((l1+l2)/L) * K) diag(b/T^T 1)^(l2/L)` with
/// `K = (a b^T)^(l_reg/L) * exp(-C/L)` and `L = l1 + l2 + l_reg`.
pub fn mm_ruot_step(plan: &TransportPlan, problem: &Problem, weights: &PenaltyWeights) -> Result<TransportPlan> {
    problem.check_plan(plan)?;
    check_nonnegative(plan)?;
    let f = ruot_factors(problem, weights)?;
    ruot_step_with(plan, problem, &f, weights.lambda_reg)
}

/// Starting plan; rows with `a_i = 0` and columns with `b_j = 0` start (and stay) empty.
pub fn initial_plan(problem: &Problem, init: MmInit) -> TransportPlan {
    let (a, b) = (problem.a.as_slice(), problem.b.as_slice());
    let (n, m) = (problem.n(), problem.m());
    let sb = problem.b.total_mass();
    let level = problem.a.total_mass() / (n * m) as f64;
    let mut data = Vec::with_capacity(n * m);
    for &ai in a {
        for &bj in b {
            data.push(match init {
                MmInit::OuterProduct => ai * bj / sb,
                MmInit::Uniform if ai > 0.0 && bj > 0.0 => level,
                MmInit::Uniform => 0.0,
            });
        }
    }
    TransportPlan::from_clamped(n, m, data)
}

enum Prepared {
    Kl(Vec<f64>),
    L2(Vec<f64>),
    L2Alt(f64, Vec<f64>),
    Ruot(RuotFactors, f64),
}

impl Prepared {
    fn new(update: &MmUpdate, problem: &Problem) -> Result<Self> {
        Ok(match *update {
            MmUpdate::Kl { lambda } => {
                check_lambda(lambda)?;
                Prepared::Kl(kl_kernel(problem, lambda))
            }
            MmUpdate::L2 { lambda } => {
                check_lambda(lambda)?;
                Prepared::L2(l2_thresholds(problem, lambda))
            }
            MmUpdate::L2Alt { lambda } => {
                check_lambda(lambda)?;
                Prepared::L2Alt(lambda, problem.mass_vector())
            }
            MmUpdate::Ruot { weights } => Prepared::Ruot(ruot_factors(problem, &weights)?, weights.lambda_reg),
        })
    }

    fn step(&self, plan: &TransportPlan, problem: &Problem) -> Result<TransportPlan> {
        match self {
            Prepared::Kl(kernel) => kl_step_with(plan, problem, kernel),
            Prepared::L2(thr) => l2_step_with(plan, problem, thr),
            Prepared::L2Alt(lambda, masses) => l2_alt_step_with(plan, problem, *lambda, masses),
            Prepared::Ruot(f, reg) => ruot_step_with(plan, problem, f, *reg),
        }
    }
}

fn marginal_errors(plan: &TransportPlan, problem: &Problem) -> (f64, f64) {
    let dev = |x: Vec<f64>, y: &[f64]| x.iter().zip(y).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
    (
        dev(plan.row_sums(), problem.a.as_slice()),
        dev(plan.col_sums(), problem.b.as_slice()),
    )
}

/// Iterates `update` from the configured starting plan.
pub fn solve_mm(problem: &Problem, update: MmUpdate, config: &MmConfig) -> Result<SolveReport> {
    solve_mm_from(problem, update, config, initial_plan(problem, config.init))
}

/// Iterates `update` from a caller-supplied plan until the relative objective
/// decrease drops below `rel_tol` (and the plan settles, if `plan_tol` is set)
/// or `max_iters` steps have run.
pub fn solve_mm_from(
    problem: &Problem,
    update: MmUpdate,
    config: &MmConfig,
    start: TransportPlan,
) -> Result<SolveReport> {
    config.validate()?;
    problem.check_plan(&start)?;
    check_nonnegative(&start)?;
    let prepared = Prepared::new(&update, problem)?;
    let mut plan = start;
    let mut value = update.objective(&plan, problem)?;
    let mut trace = config.record_trace.then(|| vec![value]);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iters {
        let next = prepared.step(&plan, problem)?;
        let next_value = update.objective(&next, problem)?;
        iterations += 1;
        let settled = config.plan_tol.is_none_or(|tol| next.max_abs_diff(&plan) <= tol);
        plan = next;
        if let Some(t) = trace.as_mut() {
            t.push(next_value);
        }
        let change = (value - next_value).abs();
        value = next_value;
        if settled && change <= config.rel_tol * value.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    let marginal_errors = marginal_errors(&plan, problem);
    Ok(SolveReport {
        plan,
        iterations,
        objective_trace: trace,
        final_objective: value,
        marginal_errors,
        converged,
    })
}

/// Parameters of the inexact proximal point scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpotConfig {
    pub lambda: f64,
    pub outer_iters: usize,
    /// Sinkhorn scalings per proximal step. One gives the classical inexact variant.
    pub inner_iters: usize,
}

impl IpotConfig {
    pub fn new(lambda: f64, outer_iters: usize) -> Self {
        IpotConfig {
            lambda,
            outer_iters,
            inner_iters: 1,
        }
    }
}

/// Balanced OT by inexact proximal point iterations.
///
/// Each outer step forms `K = exp(-C / lambda) * T_k` and runs Sinkhorn
/// scalings `u = a / (K v)`, `v = b / (K^T u)` on it, with `v` carried over
/// between outer steps. Requires `||a||_1 = ||b||_1` and strictly positive masses.
pub fn ipot_solve(problem: &Problem, config: &IpotConfig) -> Result<TransportPlan> {
    check_lambda(config.lambda)?;
    if !problem.is_balanced(1e-12) {
        return Err(UotError::Precondition(format!(
            "IPOT needs balanced masses, got {} and {}",
            problem.a.total_mass(),
            problem.b.total_mass()
        )));
    }
    let (a, b) = (problem.a.as_slice(), problem.b.as_slice());
    if a.iter().chain(b).any(|&w| w <= 0.0) {
        return Err(UotError::Precondition("IPOT needs strictly positive masses".into()));
    }
    let (n, m) = (problem.n(), problem.m());
    let gibbs: Vec<f64> = problem.cost.as_slice().iter().map(|c| (-c / config.lambda).exp()).collect();
    let sa = problem.a.total_mass();
    let mut plan: Vec<f64> = a.iter().flat_map(|&ai| b.iter().map(move |&bj| ai * bj / sa)).collect();
    let mut u = vec![1.0; n];
    let mut v = vec![1.0; m];
    let mut kernel = vec![0.0; n * m];
    for _ in 0..config.outer_iters {
        for ((k, g), t) in kernel.iter_mut().zip(&gibbs).zip(&plan) {
            *k = g * t;
        }
        for _ in 0..config.inner_iters.max(1) {
            for i in 0..n {
                let kv: f64 = kernel[i * m..(i + 1) * m].iter().zip(&v).map(|(k, vj)| k * vj).sum();
                if !(kv > 0.0) {
                    return Err(UotError::Degenerate(format!("IPOT kernel row {i} vanished")));
                }
                u[i] = a[i] / kv;
            }
            for (j, vj) in v.iter_mut().enumerate() {
                let ku: f64 = (0..n).map(|i| kernel[i * m + j] * u[i]).sum();
                if !(ku > 0.0) {
                    return Err(UotError::Degenerate(format!("IPOT kernel column {j} vanished")));
                }
                *vj = b[j] / ku;
            }
        }
        for i in 0..n {
            for j in 0..m {
                plan[i * m + j] = u[i] * kernel[i * m + j] * v[j];
            }
        }
    }
    Ok(TransportPlan::from_clamped(n, m, plan))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(rows: &[Vec<f64>]) -> TransportPlan {
        TransportPlan::from_rows(rows).unwrap()
    }

    fn unit_problem(cost: &[Vec<f64>]) -> Problem {
        Problem::from_rows(cost, &[1.0, 1.0], &[1.0, 1.0]).unwrap()
    }

    #[test]
    fn kl_step_examples() {
        let p = unit_problem(&vec![vec![0.0; 2]; 2]);
        let ones = plan(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        let out = mm_kl_step(&ones, &p, 0.7).unwrap();
        assert!(out.max_abs_diff(&plan(&[vec![0.5, 0.5], vec![0.5, 0.5]])) < 1e-15);

        let fixed = plan(&[vec![0.25, 0.75], vec![0.75, 0.25]]);
        assert!(mm_kl_step(&fixed, &p, 3.0).unwrap().max_abs_diff(&fixed) < 1e-15);
    }

    #[test]
    fn kl_step_damps_costly_entries() {
        let lambda = 0.8;
        let t = 2.0 * lambda * 2f64.ln();
        let p = unit_problem(&[vec![0.0, t], vec![t, 0.0]]);
        let uniform = plan(&[vec![0.5, 0.5], vec![0.5, 0.5]]);
        let out = mm_kl_step(&uniform, &p, lambda).unwrap();
        // marginals already met, so the only change is exp(-t / 2lambda) = 1/2 off the diagonal
        assert!((out.get(0, 0) - 0.5).abs() < 1e-15);
        assert!((out.get(0, 1) - 0.25).abs() < 1e-15);
        assert!((out.get(0, 1) / out.get(0, 0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn kl_step_rejects_empty_row_with_mass() {
        let p = unit_problem(&vec![vec![0.0; 2]; 2]);
        let t = plan(&[vec![0.0, 0.0], vec![1.0, 1.0]]);
        assert!(matches!(mm_kl_step(&t, &p, 1.0), Err(UotError::Degenerate(_))));
    }

    #[test]
    fn l2_step_examples() {
        let p = unit_problem(&[vec![0.0, 2.0], vec![2.0, 0.0]]);
        let ones = plan(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        let out = mm_l2_step(&ones, &p, 1.0).unwrap();
        assert_eq!(out, plan(&[vec![0.5, 0.0], vec![0.0, 0.5]]));

        let bad = TransportPlan::new(1, 1, vec![1.0]).unwrap();
        assert!(mm_l2_step(&bad, &p, 1.0).is_err());
    }

    #[test]
    fn l2_step_fixed_point_at_closed_form() {
        // optimum for lambda = 1 is diag(1 - 1/(2 lambda)) = diag(1/2)
        let p = unit_problem(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        let opt = plan(&[vec![0.5, 0.0], vec![0.0, 0.5]]);
        assert!(mm_l2_step(&opt, &p, 1.0).unwrap().max_abs_diff(&opt) < 1e-12);
    }

    #[test]
    fn l2_alt_step_examples() {
        let p = unit_problem(&[vec![0.0, 2.0], vec![2.0, 0.0]]);
        let ones = plan(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        let out = mm_l2_alt_step(&ones, &p, 1.0).unwrap();
        let want = plan(&[vec![2.0 / 4.0, 2.0 / 5.0], vec![2.0 / 5.0, 2.0 / 4.0]]);
        assert!(out.max_abs_diff(&want) < 1e-15);

        let z = unit_problem(&vec![vec![0.0; 2]; 2]);
        let fixed = plan(&[vec![0.5, 0.5], vec![0.5, 0.5]]);
        assert!(mm_l2_alt_step(&fixed, &z, 1.0).unwrap().max_abs_diff(&fixed) < 1e-15);
    }

    #[test]
    fn ruot_reduces_to_kl() {
        let p = Problem::from_rows(&[vec![0.3, 1.0, 2.0], vec![1.5, 0.2, 0.7]], &[0.4, 1.3], &[0.5, 0.6, 0.9]).unwrap();
        let t = initial_plan(&p, MmInit::OuterProduct);
        let w = PenaltyWeights::symmetric(0.9).unwrap();
        let r = mm_ruot_step(&t, &p, &w).unwrap();
        let k = mm_kl_step(&t, &p, 0.9).unwrap();
        assert!(r.max_abs_diff(&k) <= 1e-14);
    }

    #[test]
    fn ruot_fixed_point_at_outer_product() {
        let p = Problem::from_rows(&vec![vec![0.0; 2]; 2], &[0.4, 0.6], &[0.3, 0.7]).unwrap();
        let t = plan(&[vec![0.12, 0.28], vec![0.18, 0.42]]);
        let w = PenaltyWeights::new(1.0, 2.0, 0.5).unwrap();
        assert!(mm_ruot_step(&t, &p, &w).unwrap().max_abs_diff(&t) < 1e-15);
    }

    #[test]
    fn ruot_rejects_zero_reference_on_support() {
        let p = Problem::from_rows(&vec![vec![0.0; 2]; 2], &[0.0, 1.0], &[0.5, 0.5]).unwrap();
        let t = plan(&[vec![0.2, 0.2], vec![0.3, 0.3]]);
        let w = PenaltyWeights::new(1.0, 1.0, 1.0).unwrap();
        assert!(matches!(mm_ruot_step(&t, &p, &w), Err(UotError::Domain(_))));
    }

    #[test]
    fn zero_mass_rows_start_empty() {
        let p = Problem::from_rows(&vec![vec![1.0; 2]; 2], &[0.0, 1.0], &[0.5, 0.5]).unwrap();
        for init in [MmInit::OuterProduct, MmInit::Uniform] {
            let t = initial_plan(&p, init);
            assert_eq!(t.row_sums()[0], 0.0);
        }
        let r = solve_mm(&p, MmUpdate::Kl { lambda: 1.0 }, &MmConfig::default()).unwrap();
        assert_eq!(r.plan.row_sums()[0], 0.0);
    }

    #[test]
    fn solve_l2_two_by_two() {
        let p = unit_problem(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        let cfg = MmConfig {
            rel_tol: 1e-15,
            record_trace: true,
            ..MmConfig::default()
        };
        let r = solve_mm(&p, MmUpdate::L2 { lambda: 1.0 }, &cfg).unwrap();
        assert!(r.plan.max_abs_diff(&plan(&[vec![0.5, 0.0], vec![0.0, 0.5]])) < 1e-8);
        let trace = r.objective_trace.unwrap();
        assert!(trace.windows(2).all(|w| w[1] <= w[0] + 1e-10 * w[0].abs()));
    }

    #[test]
    fn plan_tolerance_runs_past_objective_stall() {
        let p = Problem::from_rows(&[vec![0.2, 0.9, 0.5], vec![0.7, 0.1, 0.6]], &[0.5, 0.8], &[0.4, 0.3, 0.6]).unwrap();
        let loose = MmConfig {
            rel_tol: 1e-12,
            ..MmConfig::default()
        };
        let tight = MmConfig {
            plan_tol: Some(1e-14),
            ..loose.clone()
        };
        let a = solve_mm(&p, MmUpdate::L2 { lambda: 1.0 }, &loose).unwrap();
        let b = solve_mm(&p, MmUpdate::L2 { lambda: 1.0 }, &tight).unwrap();
        assert!(b.converged && b.iterations > a.iterations);
        let step = mm_l2_step(&b.plan, &p, 1.0).unwrap();
        assert!(step.max_abs_diff(&b.plan) <= 1e-14);
        assert!(MmConfig { plan_tol: Some(-1.0), ..MmConfig::default() }.validate().is_err());
    }

    #[test]
    fn solve_reports_non_convergence() {
        let p = unit_problem(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        let cfg = MmConfig {
            max_iters: 2,
            rel_tol: 1e-300,
            ..MmConfig::default()
        };
        let r = solve_mm(&p, MmUpdate::Kl { lambda: 1.0 }, &cfg).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 2);
    }

    #[test]
    fn ipot_zero_cost_matches_marginals_in_one_pass() {
        let p = Problem::from_rows(&vec![vec![0.0; 3]; 2], &[0.4, 0.6], &[0.2, 0.3, 0.5]).unwrap();
        let t = ipot_solve(&p, &IpotConfig::new(1.0, 1)).unwrap();
        for (x, y) in t.row_sums().iter().zip([0.4, 0.6]) {
            assert!((x - y).abs() < 1e-15);
        }
        for (x, y) in t.col_sums().iter().zip([0.2, 0.3, 0.5]) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn ipot_two_by_two() {
        let p = Problem::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]], &[0.5, 0.5], &[0.5, 0.5]).unwrap();
        let t = ipot_solve(&p, &IpotConfig::new(0.1, 200)).unwrap();
        assert!(t.max_abs_diff(&plan(&[vec![0.5, 0.0], vec![0.0, 0.5]])) < 1e-9);
        assert!((t.cost(&p.cost) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ipot_rejects_unbalanced_mass() {
        let p = Problem::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]], &[1.0, 1.0], &[0.5, 0.5]).unwrap();
        assert!(matches!(ipot_solve(&p, &IpotConfig::new(1.0, 10)), Err(UotError::Precondition(_))));
    }
}
