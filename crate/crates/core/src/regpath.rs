//! Exact regularization path of the squared-error penalized problem
//!
//! ```text
//! min_{t ≥ 0} (1/λ) cᵀt + ½‖H t − y‖²
//! ```
//!
//! as λ runs from the first activation to `+∞`. Between breakpoints the active
//! entries solve `B t_A = m_A − c_A/λ` with `B = H_Aᵀ H_A`, whose inverse is
//! maintained incrementally.

use std::collections::{HashMap, HashSet};

use log::debug;
use nalgebra::DMatrix;

use crate::error::{Result, UotError};
use crate::operator::DesignOperator;
use crate::homotopy::{trace, ActiveSystem, Scales, Terms};
use crate::path::{LambdaValue, PathKind, RegularizationPath, TIE_RTOL};
use crate::problem::{FlatIndex, Problem, TransportPlan};
use crate::schur::SymmetricInverse;

/// Ordered set of active plan entries. The order matches the cached inverse.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ActiveSet {
    members: Vec<FlatIndex>,
    /// Dense map from flat index to position, `usize::MAX` when inactive.
    position: Vec<usize>,
}

impl ActiveSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_members(members: Vec<FlatIndex>) -> Result<Self> {
        let mut set = ActiveSet::new();
        for q in members {
            if set.contains(q.flat) {
                return Err(UotError::Precondition(format!("duplicate active entry ({}, {})", q.i, q.j)));
            }
            set.push(q);
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[FlatIndex] {
        &self.members
    }

    pub fn contains(&self, flat: usize) -> bool {
        self.position_of(flat).is_some()
    }

    pub fn position_of(&self, flat: usize) -> Option<usize> {
        self.position.get(flat).copied().filter(|&p| p != usize::MAX)
    }

    pub(crate) fn push(&mut self, q: FlatIndex) {
        if self.position.len() <= q.flat {
            self.position.resize(q.flat + 1, usize::MAX);
        }
        self.position[q.flat] = self.members.len();
        self.members.push(q);
    }

    pub(crate) fn remove_at(&mut self, pos: usize) -> FlatIndex {
        let q = self.members.remove(pos);
        self.position[q.flat] = usize::MAX;
        for (k, p) in self.members.iter().enumerate().skip(pos) {
            self.position[p.flat] = k;
        }
        q
    }
}

/// `H_Aᵀ H_A` for the given members: entry `(p, q)` is `[i_p = i_q] + [j_p = j_q]`.
pub fn gram_matrix(members: &[FlatIndex]) -> DMatrix<f64> {
    let k = members.len();
    DMatrix::from_fn(k, k, |r, c| {
        let (p, q) = (members[r], members[c]);
        DesignOperator::gram_entry(p.i, p.j, q.i, q.j)
    })
}

fn gram_border(members: &[FlatIndex], q: FlatIndex) -> Vec<f64> {
    members.iter().map(|p| DesignOperator::gram_entry(p.i, p.j, q.i, q.j)).collect()
}

/// `H_Aᵀ H_A x` in `O(|A|)`: row sum of `x` over the entry's row plus column sum over its column.
fn gram_apply_active(members: &[FlatIndex], x: &[f64]) -> Vec<f64> {
    let mut rows: HashMap<usize, f64> = HashMap::new();
    let mut cols: HashMap<usize, f64> = HashMap::new();
    for (q, v) in members.iter().zip(x) {
        *rows.entry(q.i).or_default() += v;
        *cols.entry(q.j).or_default() += v;
    }
    members.iter().map(|q| rows[&q.i] + cols[&q.j]).collect()
}

const DRIFT_TOL: f64 = 1e-10;

/// Incrementally maintained `(H_Aᵀ H_A)⁻¹`.
#[derive(Debug, Clone)]
pub struct GramInverseCache {
    inverse: SymmetricInverse,
    updates_since_refresh: usize,
    refresh_every: usize,
    threshold: f64,
}

impl Default for GramInverseCache {
    fn default() -> Self {
        Self::with_policy(50, 1e-10)
    }
}

impl GramInverseCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Full refactorization every `refresh_every` updates; Schur pivots below
    /// `threshold` also trigger one.
    pub fn with_policy(refresh_every: usize, threshold: f64) -> Self {
        GramInverseCache {
            inverse: SymmetricInverse::empty(),
            updates_since_refresh: 0,
            refresh_every: refresh_every.max(1),
            threshold,
        }
    }

    pub fn from_active(active: &ActiveSet) -> Result<Self> {
        let mut cache = Self::new();
        cache.refresh(active)?;
        Ok(cache)
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        self.inverse.matrix()
    }

    pub fn updates_since_refresh(&self) -> usize {
        self.updates_since_refresh
    }

    /// Schur complement `S = 2 − bᵀB⁻¹b` that adding `q` would produce.
    pub fn schur_complement(&self, active: &ActiveSet, q: FlatIndex) -> f64 {
        self.inverse.schur_complement(&gram_border(active.members(), q), 2.0)
    }

    /// Replaces the cached inverse by a direct factorization.
    pub fn refresh(&mut self, active: &ActiveSet) -> Result<()> {
        self.inverse = SymmetricInverse::factorize(gram_matrix(active.members()), true).ok_or_else(|| {
            UotError::Singular(format!("Gram matrix of {} active entries is singular", active.len()))
        })?;
        self.updates_since_refresh = 0;
        Ok(())
    }

    /// Every `refresh_every` updates the cached inverse is probed against the
    /// matrix-free Gram product and refactorized if it drifted.
    fn count_update(&mut self, active: &ActiveSet) -> Result<()> {
        self.updates_since_refresh += 1;
        if self.updates_since_refresh >= self.refresh_every {
            if self.inverse.probe_residual(|x| gram_apply_active(active.members(), x)) > DRIFT_TOL {
                debug!("Gram inverse drifted, refactorizing {} entries", active.len());
                self.refresh(active)?;
            }
            self.updates_since_refresh = 0;
        }
        Ok(())
    }

    /// Adds `q` to `active` and borders the inverse accordingly.
    pub fn schur_add(&mut self, active: &mut ActiveSet, q: FlatIndex) -> Result<()> {
        if active.contains(q.flat) {
            return Err(UotError::Precondition(format!("entry ({}, {}) is already active", q.i, q.j)));
        }
        let border = gram_border(active.members(), q);
        match self.inverse.append(&border, 2.0, self.threshold) {
            Ok(_) => {
                active.push(q);
                self.count_update(active)
            }
            Err(s) => {
                debug!("small Schur complement {s:e} adding ({}, {}), refactorizing", q.i, q.j);
                let mut trial = active.clone();
                trial.push(q);
                self.refresh(&trial)?;
                *active = trial;
                Ok(())
            }
        }
    }

    /// Removes the entry with flat index `flat` from `active` and the inverse.
    pub fn schur_remove(&mut self, active: &mut ActiveSet, flat: usize) -> Result<FlatIndex> {
        let pos = active
            .position_of(flat)
            .ok_or_else(|| UotError::Precondition(format!("flat index {flat} is not active")))?;
        match self.inverse.remove(pos, self.threshold) {
            Ok(_) => {
                let q = active.remove_at(pos);
                self.count_update(active)?;
                Ok(q)
            }
            Err(pivot) => {
                debug!("small pivot {pivot:e} removing flat {flat}, refactorizing");
                let mut trial = active.clone();
                let q = trial.remove_at(pos);
                self.refresh(&trial)?;
                *active = trial;
                Ok(q)
            }
        }
    }

    /// `B⁻¹ v`.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        self.inverse.solve(rhs)
    }

    /// Max-norm distance between the cached inverse and a fresh one.
    pub fn drift(&self, active: &ActiveSet) -> f64 {
        match SymmetricInverse::factorize(gram_matrix(active.members()), true) {
            Some(fresh) => (fresh.matrix() - self.inverse.matrix()).amax(),
            None => f64::INFINITY,
        }
    }
}

/// First activation `λ₁ = min c/m` over entries with `m > 0`, and every entry attaining it.
pub fn initial_breakpoint(problem: &Problem) -> Result<(f64, Vec<FlatIndex>)> {
    let mv = problem.mass_vector();
    let c = problem.cost.as_slice();
    let ratios: Vec<Option<f64>> = mv.iter().zip(c).map(|(&m, &c)| (m > 0.0).then(|| c / m)).collect();
    let lambda1 = ratios.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    if !lambda1.is_finite() {
        return Err(UotError::Degenerate("every entry of a 1ᵀ + 1 bᵀ is zero".into()));
    }
    let cutoff = lambda1 + TIE_RTOL * lambda1;
    let m = problem.m();
    let active = ratios
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_some_and(|r| r <= cutoff))
        .map(|(flat, _)| FlatIndex::from_flat(flat, m))
        .collect();
    Ok((lambda1, active))
}

/// Smallest `c̃/m̃` strictly above `λ_k`, with its position in the active set.
pub fn next_removal_lambda(m_tilde: &[f64], c_tilde: &[f64], lambda_k: f64) -> Option<(f64, usize)> {
    let floor = lambda_k * (1.0 + TIE_RTOL);
    m_tilde
        .iter()
        .zip(c_tilde)
        .enumerate()
        .map(|(p, (m, c))| (c / m, p))
        .filter(|(r, _)| r.is_finite() && *r > floor)
        .min_by(|x, y| x.0.total_cmp(&y.0))
}

/// Zero-extends active coefficients to the full grid.
fn scatter(active: &[FlatIndex], values: &[f64], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (q, v) in active.iter().zip(values) {
        out[q.flat] = *v;
    }
    out
}

/// Numerator `c − HᵀH c̃` and denominator `m − HᵀH m̃` of the activation ratio.
fn activation_terms(problem: &Problem, active: &[FlatIndex], m_tilde: &[f64], c_tilde: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (n, m) = (problem.n(), problem.m());
    let op = DesignOperator::new(n, m);
    let len = n * m;
    let gm = op.gram(&scatter(active, m_tilde, len)).expect("length checked");
    let gc = op.gram(&scatter(active, c_tilde, len)).expect("length checked");
    let num = problem.cost.as_slice().iter().zip(&gc).map(|(c, g)| c - g).collect();
    let den = problem.mass_vector().iter().zip(&gm).map(|(mv, g)| mv - g).collect();
    (num, den)
}

/// Smallest `(c − HᵀH c̃)/(m − HᵀH m̃)` over inactive entries with a positive
/// denominator and a ratio strictly above `λ_k`.
pub fn next_addition_lambda(
    problem: &Problem,
    active: &ActiveSet,
    m_tilde: &[f64],
    c_tilde: &[f64],
    lambda_k: f64,
) -> Option<(f64, FlatIndex)> {
    let (num, den) = activation_terms(problem, active.members(), m_tilde, c_tilde);
    let floor = lambda_k * (1.0 + TIE_RTOL);
    (0..num.len())
        .filter(|&f| !active.contains(f) && den[f] > 0.0)
        .map(|f| (num[f] / den[f], f))
        .filter(|(r, _)| *r > floor)
        .min_by(|x, y| x.0.total_cmp(&y.0))
        .map(|(r, f)| (r, FlatIndex::from_flat(f, problem.m())))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOptions {
    pub max_segments: usize,
    /// Pivot magnitude below which Schur updates fall back to refactorization.
    pub singular_threshold: f64,
    pub refresh_every: usize,
}

impl Default for PathOptions {
    fn default() -> Self {
        PathOptions {
            max_segments: 100_000,
            singular_threshold: 1e-10,
            refresh_every: 50,
        }
    }
}

/// The active set of the full problem together with its Gram inverse.
struct FullSystem<'a> {
    problem: &'a Problem,
    mass: Vec<f64>,
    mass_a: Vec<f64>,
    mass_b: Vec<f64>,
    active: ActiveSet,
    cache: GramInverseCache,
}

impl ActiveSystem for FullSystem<'_> {
    fn cols(&self) -> usize {
        self.problem.m()
    }

    fn active(&self) -> &ActiveSet {
        &self.active
    }

    fn extra(&self) -> usize {
        0
    }

    fn add(&mut self, q: FlatIndex) -> Result<()> {
        self.cache.schur_add(&mut self.active, q)
    }

    fn remove(&mut self, flat: usize) -> Result<()> {
        self.cache.schur_remove(&mut self.active, flat).map(|_| ())
    }

    fn schur_complement(&self, q: FlatIndex) -> f64 {
        self.cache.schur_complement(&self.active, q)
    }

    fn solve(&self) -> (Vec<f64>, Vec<f64>) {
        let c = self.problem.cost.as_slice();
        let m_a: Vec<f64> = self.active.members().iter().map(|q| self.mass[q.flat]).collect();
        let c_a: Vec<f64> = self.active.members().iter().map(|q| c[q.flat]).collect();
        self.cache.inverse.solve_pair(&m_a, &c_a)
    }

    fn terms(&self, sol_m: &[f64], sol_c: &[f64]) -> Terms<'_> {
        let (n, m) = (self.problem.n(), self.problem.m());
        let mut terms = Terms {
            cols: m,
            cost: self.problem.cost.as_slice(),
            mass_row: &self.mass_a,
            mass_col: &self.mass_b,
            num_row: vec![0.0; n],
            num_col: vec![0.0; m],
            den_row: vec![0.0; n],
            den_col: vec![0.0; m],
        };
        for ((q, vm), vc) in self.active.members().iter().zip(sol_m).zip(sol_c) {
            terms.num_row[q.i] += vc;
            terms.num_col[q.j] += vc;
            terms.den_row[q.i] += vm;
            terms.den_col[q.j] += vm;
        }
        terms
    }

    fn balanced_limit(&self, sol_m: &[f64]) -> bool {
        let (n, m) = (self.problem.n(), self.problem.m());
        let t = scatter(self.active.members(), sol_m, n * m);
        let ht = DesignOperator::new(n, m).apply_slice(&t).expect("length checked");
        let y = self.problem.targets();
        let res: f64 = ht.iter().zip(y.as_slice()).map(|(h, y)| (h - y).powi(2)).sum();
        let norm: f64 = y.as_slice().iter().map(|v| v * v).sum();
        res <= 1e-12 * norm
    }
}

/// Computes the whole path, from the first activation to the balanced limit.
pub fn compute_path(problem: &Problem, options: &PathOptions) -> Result<RegularizationPath> {
    let mass = problem.mass_vector();
    let scales = Scales {
        cost: problem.cost.as_slice().iter().fold(0.0f64, |s, v| s.max(v.abs())).max(f64::MIN_POSITIVE),
        mass: mass.iter().fold(0.0f64, |s, v| s.max(*v)),
    };
    let (lambda1, tied) = initial_breakpoint(problem)?;
    let mut sys = FullSystem {
        problem,
        mass,
        mass_a: problem.a.as_slice().to_vec(),
        mass_b: problem.b.as_slice().to_vec(),
        active: ActiveSet::new(),
        cache: GramInverseCache::with_policy(options.refresh_every, options.singular_threshold),
    };
    let pool: HashSet<usize> = tied.iter().map(|q| q.flat).collect();
    trace(&mut sys, PathKind::Full, problem.n(), lambda1, pool, options, scales)
}

/// Plan on the path at `lambda`; zero below the first breakpoint.
pub fn eval_path_at(path: &RegularizationPath, lambda: LambdaValue) -> Result<TransportPlan> {
    path.eval(lambda)
}
