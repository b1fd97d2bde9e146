//! Bregman divergences and the two objective functions.
//!
//! `objective` is the regression form `(1/lambda) <c, t> + D(H t, y)`;
//! `objective_regularized` is the weighted form
//! `<C, T> + l1 D(T 1, a) + l2 D(T^T 1, b) + l_reg D(T, a b^T)`.
//! With `l1 = l2 = lambda` and `l_reg = 0` the second equals `lambda` times the first.

use crate::error::{Result, UotError};
use crate::operator::DesignOperator;
use crate::problem::{Problem, TransportPlan};

/// Generator of a separable Bregman divergence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DivergenceKind {
    /// `phi(y) = y log y - y`.
    Kl,
    /// `phi(y) = y^2 / 2`, so that `D(u, v) = ||u - v||^2 / 2`.
    QuadraticL2,
}

impl DivergenceKind {
    /// Homogeneity exponent: `lambda D(x, y) = D(lambda^alpha x, lambda^alpha y)`.
    pub fn homogeneity_exponent(self) -> f64 {
        match self {
            DivergenceKind::Kl => 1.0,
            DivergenceKind::QuadraticL2 => 0.5,
        }
    }

    /// `phi'(y)`.
    pub fn generator_grad(self, y: f64) -> f64 {
        match self {
            DivergenceKind::Kl => y.ln(),
            DivergenceKind::QuadraticL2 => y,
        }
    }
}

/// Scalar divergence `d(u, v)`.
fn scalar(kind: DivergenceKind, u: f64, v: f64, k: usize) -> Result<f64> {
    if u.is_nan() || v.is_nan() {
        return Err(UotError::Domain(format!("NaN input at index {k}")));
    }
    match kind {
        DivergenceKind::QuadraticL2 => Ok(0.5 * (u - v) * (u - v)),
        DivergenceKind::Kl => {
            if u < 0.0 {
                return Err(UotError::Domain(format!("KL first argument negative at index {k}")));
            }
            if v < 0.0 || (v == 0.0 && u > 0.0) {
                return Err(UotError::Domain(format!(
                    "KL second argument must be positive, got {v} at index {k}"
                )));
            }
            if u == 0.0 {
                // 0 log 0 = 0
                Ok(v)
            } else {
                Ok(u * (u / v).ln() - u + v)
            }
        }
    }
}

/// `D_phi(u, v) = sum_k d(u_k, v_k)`.
///
/// KL uses the convention `0 log 0 = 0`; a pair `(0, 0)` contributes zero,
/// any other non-positive second argument is a domain error.
pub fn bregman(kind: DivergenceKind, u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(UotError::Dimension {
            what: "divergence arguments",
            expected: u.len(),
            got: v.len(),
        });
    }
    u.iter()
        .zip(v)
        .enumerate()
        .try_fold(0.0, |acc, (k, (&x, &y))| Ok(acc + scalar(kind, x, y, k)?))
}

/// `F_lambda(t) = (1/lambda) <c, t> + D_phi(H t, y)`.
pub fn objective(kind: DivergenceKind, lambda: f64, plan: &TransportPlan, problem: &Problem) -> Result<f64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(UotError::Domain(format!("lambda must be positive and finite, got {lambda}")));
    }
    problem.check_plan(plan)?;
    let h = DesignOperator::new(problem.n(), problem.m());
    let ht = h.apply_slice(plan.as_slice())?;
    let fit = bregman(kind, &ht, problem.targets().as_slice())?;
    Ok(plan.cost(&problem.cost) / lambda + fit)
}

/// Analytic gradient `(1/lambda) c + H^T (phi'(H t) - phi'(y))`.
pub fn objective_gradient(
    kind: DivergenceKind,
    lambda: f64,
    t: &[f64],
    problem: &Problem,
) -> Result<Vec<f64>> {
    let h = DesignOperator::new(problem.n(), problem.m());
    let ht = h.apply_slice(t)?;
    let y = problem.targets();
    let diff: Vec<f64> = ht
        .iter()
        .zip(y.as_slice())
        .map(|(&u, &v)| kind.generator_grad(u) - kind.generator_grad(v))
        .collect();
    let mut g = h.adjoint_slice(&diff)?;
    for (gk, ck) in g.iter_mut().zip(problem.cost.as_slice()) {
        *gk += ck / lambda;
    }
    Ok(g)
}

/// Weight on one marginal penalty. `Infinite` turns the penalty into an equality constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    Finite(f64),
    Infinite,
}

impl Penalty {
    pub fn finite(self) -> Option<f64> {
        match self {
            Penalty::Finite(v) => Some(v),
            Penalty::Infinite => None,
        }
    }
}

/// Weights `(lambda1, lambda2, lambda_reg)` of the general regularized problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyWeights {
    pub lambda1: Penalty,
    pub lambda2: Penalty,
    pub lambda_reg: f64,
}

impl PenaltyWeights {
    pub fn new(lambda1: f64, lambda2: f64, lambda_reg: f64) -> Result<Self> {
        let w = PenaltyWeights {
            lambda1: Penalty::Finite(lambda1),
            lambda2: Penalty::Finite(lambda2),
            lambda_reg,
        };
        w.validate()?;
        Ok(w)
    }

    /// Plain UOT with a shared marginal weight.
    pub fn symmetric(lambda: f64) -> Result<Self> {
        Self::new(lambda, lambda, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if let Penalty::Finite(v) = p {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(UotError::Domain(format!("{name} must be positive, got {v}")));
                }
            }
        }
        if !(self.lambda_reg >= 0.0) || !self.lambda_reg.is_finite() {
            return Err(UotError::Domain(format!(
                "lambda_reg must be non-negative, got {}",
                self.lambda_reg
            )));
        }
        Ok(())
    }
}

// Marginal violations below this are treated as satisfying an equality constraint.
const CONSTRAINT_TOL: f64 = 1e-9;

fn weighted_term(kind: DivergenceKind, weight: Penalty, u: &[f64], v: &[f64]) -> Result<f64> {
    match weight {
        Penalty::Finite(w) => Ok(w * bregman(kind, u, v)?),
        Penalty::Infinite => {
            let scale = v.iter().fold(1.0f64, |s, x| s.max(x.abs()));
            let violated = u.iter().zip(v).any(|(x, y)| (x - y).abs() > CONSTRAINT_TOL * scale);
            Ok(if violated { f64::INFINITY } else { 0.0 })
        }
    }
}

/// `<C, T> + l1 D(T 1_m, a) + l2 D(T^T 1_n, b) + l_reg D(T, a b^T)`.
///
/// An infinite marginal weight contributes zero when the marginal is met and `+inf` otherwise.
pub fn objective_regularized(
    kind: DivergenceKind,
    weights: &PenaltyWeights,
    plan: &TransportPlan,
    problem: &Problem,
) -> Result<f64> {
    weights.validate()?;
    problem.check_plan(plan)?;
    let mut total = plan.cost(&problem.cost);
    total += weighted_term(kind, weights.lambda1, &plan.row_sums(), problem.a.as_slice())?;
    total += weighted_term(kind, weights.lambda2, &plan.col_sums(), problem.b.as_slice())?;
    if weights.lambda_reg > 0.0 {
        let mut outer = Vec::with_capacity(problem.n() * problem.m());
        for &ai in problem.a.as_slice() {
            outer.extend(problem.b.as_slice().iter().map(|&bj| ai * bj));
        }
        total += weights.lambda_reg * bregman(kind, plan.as_slice(), &outer)?;
    }
    Ok(total)
}
