//! Piecewise-affine solution paths and their evaluation.
//!
//! On each segment the active entries follow `t(λ) = m̃ − c̃/λ`, so a path is
//! fully described by its breakpoints and the per-segment coefficient pairs.

use std::fmt;
use std::str::FromStr;

use crate::divergence::{objective, DivergenceKind};
use crate::error::{Result, UotError};
use crate::problem::{FlatIndex, Problem, TransportPlan};

/// Which penalized problem a path solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathKind {
    /// Both marginals penalized by a squared error.
    Full,
    /// Row marginal penalized, column marginal enforced exactly.
    SemiRelaxed,
}

impl PathKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PathKind::Full => "full",
            PathKind::SemiRelaxed => "semi-relaxed",
        }
    }
}

/// A penalty weight, possibly the symbolic `+∞` (balanced limit).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaValue {
    Finite(f64),
    Infinite,
}

impl LambdaValue {
    pub fn is_infinite(self) -> bool {
        matches!(self, LambdaValue::Infinite)
    }
}

impl From<f64> for LambdaValue {
    fn from(v: f64) -> Self {
        if v == f64::INFINITY {
            LambdaValue::Infinite
        } else {
            LambdaValue::Finite(v)
        }
    }
}

impl fmt::Display for LambdaValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LambdaValue::Finite(v) => write!(f, "{v}"),
            LambdaValue::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for LambdaValue {
    type Err = UotError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("+inf") || s.eq_ignore_ascii_case("infinity") {
            return Ok(LambdaValue::Infinite);
        }
        s.parse::<f64>()
            .map(LambdaValue::from)
            .map_err(|e| UotError::Parse(format!("lambda `{s}`: {e}")))
    }
}

/// Affine coefficients of the column multipliers `u(λ) = m̃ᵇ − c̃ᵇ/λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierCoefficients {
    pub m_tilde: Vec<f64>,
    pub c_tilde: Vec<f64>,
}

/// One affine piece of a path, valid on `[lambda_lo, lambda_hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSegment {
    pub lambda_lo: f64,
    /// `None` encodes `+∞`.
    pub lambda_hi: Option<f64>,
    pub active: Vec<FlatIndex>,
    pub m_tilde: Vec<f64>,
    pub c_tilde: Vec<f64>,
    pub multipliers: Option<MultiplierCoefficients>,
}

impl PathSegment {
    /// Raw active values at `lambda`, without clamping.
    pub fn active_values(&self, lambda: LambdaValue) -> Vec<f64> {
        match lambda {
            LambdaValue::Infinite => self.m_tilde.clone(),
            LambdaValue::Finite(l) => self.m_tilde.iter().zip(&self.c_tilde).map(|(m, c)| m - c / l).collect(),
        }
    }

    /// Plan at `lambda` scattered into a row-major `n × m` vector, clamped at zero.
    pub fn plan_at(&self, lambda: LambdaValue, n: usize, m: usize) -> TransportPlan {
        let mut data = vec![0.0; n * m];
        for (idx, v) in self.active.iter().zip(self.active_values(lambda)) {
            data[idx.flat] = v;
        }
        TransportPlan::from_clamped(n, m, data)
    }

    pub fn contains(&self, lambda: f64) -> bool {
        lambda >= self.lambda_lo && self.lambda_hi.is_none_or(|hi| lambda <= hi)
    }
}

/// A computed regularization path. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularizationPath {
    pub kind: PathKind,
    pub n: usize,
    pub m: usize,
    pub segments: Vec<PathSegment>,
    /// The last segment is unbounded and its limit matches the penalized marginals.
    pub terminal_balanced: bool,
    /// False when construction stopped at the segment limit.
    pub complete: bool,
    /// Breakpoints where an entry left and another entered at the same λ.
    pub coincident_events: usize,
}

impl RegularizationPath {
    /// Lower ends of all segments, in increasing order.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.lambda_lo).collect()
    }

    /// Finite λ values strictly inside each segment, useful for sampling.
    pub fn segment_midpoints(&self) -> Vec<f64> {
        self.segments
            .iter()
            .map(|s| match s.lambda_hi {
                Some(hi) => 0.5 * (s.lambda_lo + hi),
                None => 2.0 * s.lambda_lo.max(1e-3) + 1.0,
            })
            .collect()
    }

    /// Index of the segment covering `lambda`. At a breakpoint the later segment wins.
    fn locate(&self, lambda: f64) -> Option<usize> {
        let count = self.segments.partition_point(|s| s.lambda_lo <= lambda);
        count.checked_sub(1)
    }

    fn segment_for(&self, lambda: LambdaValue) -> Result<Option<&PathSegment>> {
        match lambda {
            LambdaValue::Finite(l) => {
                if !(l > 0.0) || l.is_nan() {
                    return Err(UotError::Domain(format!("lambda must be positive, got {l}")));
                }
                let Some(k) = self.locate(l) else {
                    return Ok(None);
                };
                let seg = &self.segments[k];
                if !seg.contains(l) {
                    return Err(UotError::Precondition(format!(
                        "lambda {l} lies beyond the computed part of the path (ends at {})",
                        seg.lambda_hi.unwrap_or(f64::INFINITY)
                    )));
                }
                Ok(Some(seg))
            }
            LambdaValue::Infinite => match self.segments.last() {
                Some(seg) if seg.lambda_hi.is_none() => Ok(Some(seg)),
                Some(_) => Err(UotError::Precondition("path is truncated, its limit at infinity is unknown".into())),
                None => Ok(None),
            },
        }
    }

    /// Optimal plan at `lambda`. Below the first breakpoint the plan is zero.
    pub fn eval(&self, lambda: LambdaValue) -> Result<TransportPlan> {
        Ok(match self.segment_for(lambda)? {
            Some(seg) => seg.plan_at(lambda, self.n, self.m),
            None => TransportPlan::zeros(self.n, self.m),
        })
    }

    /// Column multipliers at `lambda` (semi-relaxed paths only).
    pub fn multipliers_at(&self, lambda: LambdaValue) -> Result<Option<Vec<f64>>> {
        let Some(seg) = self.segment_for(lambda)? else {
            return Ok(None);
        };
        Ok(seg.multipliers.as_ref().map(|mc| match lambda {
            LambdaValue::Infinite => mc.m_tilde.clone(),
            LambdaValue::Finite(l) => mc.m_tilde.iter().zip(&mc.c_tilde).map(|(m, c)| m - c / l).collect(),
        }))
    }

    /// Penalized objective `(1/λ)⟨C,T⟩ + D(Ht, y)` at a finite λ on the path.
    pub fn objective_at(&self, problem: &Problem, lambda: f64) -> Result<f64> {
        let plan = self.eval(LambdaValue::Finite(lambda))?;
        match self.kind {
            PathKind::Full => objective(DivergenceKind::QuadraticL2, lambda, &plan, problem),
            PathKind::SemiRelaxed => {
                let rows = plan.row_sums();
                let fit: f64 = rows.iter().zip(problem.a.as_slice()).map(|(r, a)| 0.5 * (r - a).powi(2)).sum();
                Ok(plan.cost(&problem.cost) / lambda + fit)
            }
        }
    }
}

/// Evaluates a path at `lambda`; zero plan below the first breakpoint, `m̃` at `+∞`.
pub fn eval_path_at(path: &RegularizationPath, lambda: LambdaValue) -> Result<TransportPlan> {
    path.eval(lambda)
}

/// Candidate breakpoint: `(λ, id)`.
pub(crate) type Candidate = (f64, usize);

/// Outcome of merging removal and addition candidates at one breakpoint.
#[derive(Debug, Default)]
pub(crate) struct Event {
    pub lambda: f64,
    pub removals: Vec<usize>,
    pub additions: Vec<usize>,
}

pub(crate) const TIE_RTOL: f64 = 1e-12;

/// Smallest candidate λ and every candidate tied with it within `TIE_RTOL`.
pub(crate) fn next_event(removals: &[Candidate], additions: &[Candidate]) -> Option<Event> {
    let best = removals.iter().chain(additions).map(|c| c.0).fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return None;
    }
    let cutoff = best + TIE_RTOL * best.abs();
    let pick = |cands: &[Candidate]| -> Vec<usize> {
        let mut ids: Vec<usize> = cands.iter().filter(|c| c.0 <= cutoff).map(|c| c.1).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    };
    Some(Event {
        lambda: best,
        removals: pick(removals),
        additions: pick(additions),
    })
}
