//! Regularization path of the semi-relaxed problem
//!
//! ```text
//! min_{t ≥ 0, Tᵀ1 = b} (1/λ) cᵀt + ½‖T1 − a‖²
//! ```
//!
//! for λ from 0 to `+∞`. The active plan entries and the column multipliers
//! `u` solve the bordered system
//!
//! ```text
//! [ 0   E ] [u  ]   [b  ]         [0  ]
//! [ Eᵀ  R ] [t_A] = [a_A] − (1/λ) [c_A]
//! ```
//!
//! with `E_{j,p} = [j_p = j]` and `R_{pq} = [i_p = i_q]`. The system is
//! singular exactly when a column has no active entry or the support graph
//! has a cycle.

use std::collections::HashSet;

use log::debug;
use nalgebra::DMatrix;

use crate::error::{Result, UotError};
use crate::homotopy::{trace, ActiveSystem, Scales, Terms};
use crate::path::{LambdaValue, PathKind, RegularizationPath};
use crate::problem::{FlatIndex, Problem, TransportPlan};
use crate::regpath::{ActiveSet, PathOptions};
use crate::schur::SymmetricInverse;

const DRIFT_TOL: f64 = 1e-10;

/// Plan at λ → 0⁺: each column's mass on its cheapest row, smallest row on ties.
pub fn sr_initial_plan(problem: &Problem) -> TransportPlan {
    let (n, m) = (problem.n(), problem.m());
    let mut data = vec![0.0; n * m];
    for (j, &bj) in problem.b.as_slice().iter().enumerate() {
        data[argmin_row(problem, j) * m + j] = bj;
    }
    TransportPlan::from_clamped(n, m, data)
}

fn argmin_row(problem: &Problem, j: usize) -> usize {
    (0..problem.n()).fold(0, |best, i| if problem.cost.get(i, j) < problem.cost.get(best, j) { i } else { best })
}

/// Bordered KKT matrix for `members`, multipliers first.
fn kkt_matrix(m: usize, members: &[FlatIndex]) -> DMatrix<f64> {
    let k = members.len();
    let mut mat = DMatrix::zeros(m + k, m + k);
    for (p, qp) in members.iter().enumerate() {
        mat[(qp.j, m + p)] = 1.0;
        mat[(m + p, qp.j)] = 1.0;
        for (r, qr) in members.iter().enumerate() {
            if qp.i == qr.i {
                mat[(m + p, m + r)] = 1.0;
            }
        }
    }
    mat
}

struct SrSystem<'a> {
    problem: &'a Problem,
    zeros: Vec<f64>,
    active: ActiveSet,
    inverse: SymmetricInverse,
    updates_since_refresh: usize,
    options: PathOptions,
}

impl SrSystem<'_> {
    fn border(&self, q: FlatIndex) -> Vec<f64> {
        let m = self.problem.m();
        let mut border = vec![0.0; m + self.active.len()];
        border[q.j] = 1.0;
        for (p, qp) in self.active.members().iter().enumerate() {
            if qp.i == q.i {
                border[m + p] = 1.0;
            }
        }
        border
    }

    /// Matrix-free product with the bordered system.
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let (n, m) = (self.problem.n(), self.problem.m());
        let members = self.active.members();
        let (u, t) = x.split_at(m);
        let mut rows = vec![0.0; n];
        let mut out = vec![0.0; x.len()];
        for (q, v) in members.iter().zip(t) {
            rows[q.i] += v;
            out[q.j] += v;
        }
        for (p, q) in members.iter().enumerate() {
            out[m + p] = u[q.j] + rows[q.i];
        }
        out
    }

    fn refresh(&mut self, active: &ActiveSet) -> Result<()> {
        let m = self.problem.m();
        self.inverse = SymmetricInverse::factorize(kkt_matrix(m, active.members()), false).ok_or_else(|| {
            let mut covered = vec![false; m];
            for q in active.members() {
                covered[q.j] = true;
            }
            match covered.iter().position(|c| !c) {
                Some(j) => UotError::Degenerate(format!("column {j} has no active entry left")),
                None => UotError::Singular(format!("KKT system with {} active entries is singular", active.len())),
            }
        })?;
        self.updates_since_refresh = 0;
        Ok(())
    }

    fn count_update(&mut self) -> Result<()> {
        self.updates_since_refresh += 1;
        if self.updates_since_refresh >= self.options.refresh_every {
            if self.inverse.probe_residual(|x| self.apply(x)) > DRIFT_TOL {
                debug!("KKT inverse drifted, refactorizing {} entries", self.active.len());
                let active = self.active.clone();
                self.refresh(&active)?;
            }
            self.updates_since_refresh = 0;
        }
        Ok(())
    }
}

impl ActiveSystem for SrSystem<'_> {
    fn cols(&self) -> usize {
        self.problem.m()
    }

    fn active(&self) -> &ActiveSet {
        &self.active
    }

    fn extra(&self) -> usize {
        self.problem.m()
    }

    fn add(&mut self, q: FlatIndex) -> Result<()> {
        let border = self.border(q);
        match self.inverse.append(&border, 1.0, self.options.singular_threshold) {
            Ok(_) => {
                self.active.push(q);
                self.count_update()
            }
            Err(s) => {
                debug!("small Schur complement {s:e} adding ({}, {}), refactorizing", q.i, q.j);
                let mut trial = self.active.clone();
                trial.push(q);
                self.refresh(&trial)?;
                self.active = trial;
                Ok(())
            }
        }
    }

    fn remove(&mut self, flat: usize) -> Result<()> {
        let pos = self
            .active
            .position_of(flat)
            .ok_or_else(|| UotError::Precondition(format!("flat index {flat} is not active")))?;
        let m = self.problem.m();
        match self.inverse.remove(m + pos, self.options.singular_threshold) {
            Ok(_) => {
                self.active.remove_at(pos);
                self.count_update()
            }
            Err(pivot) => {
                debug!("small pivot {pivot:e} removing flat {flat}, refactorizing");
                let mut trial = self.active.clone();
                trial.remove_at(pos);
                self.refresh(&trial)?;
                self.active = trial;
                Ok(())
            }
        }
    }

    fn schur_complement(&self, q: FlatIndex) -> f64 {
        self.inverse.schur_complement(&self.border(q), 1.0)
    }

    fn solve(&self) -> (Vec<f64>, Vec<f64>) {
        let c = self.problem.cost.as_slice();
        let a = self.problem.a.as_slice();
        let mut beta = self.problem.b.as_slice().to_vec();
        let mut gamma = vec![0.0; self.problem.m()];
        for q in self.active.members() {
            beta.push(a[q.i]);
            gamma.push(c[q.flat]);
        }
        self.inverse.solve_pair(&beta, &gamma)
    }

    fn terms(&self, sol_m: &[f64], sol_c: &[f64]) -> Terms<'_> {
        let (n, m) = (self.problem.n(), self.problem.m());
        let mut terms = Terms {
            cols: m,
            cost: self.problem.cost.as_slice(),
            mass_row: self.problem.a.as_slice(),
            mass_col: &self.zeros,
            num_row: vec![0.0; n],
            num_col: sol_c[..m].to_vec(),
            den_row: vec![0.0; n],
            den_col: sol_m[..m].to_vec(),
        };
        for ((q, vm), vc) in self.active.members().iter().zip(&sol_m[m..]).zip(&sol_c[m..]) {
            terms.num_row[q.i] += vc;
            terms.den_row[q.i] += vm;
        }
        terms
    }

    fn balanced_limit(&self, sol_m: &[f64]) -> bool {
        let a = self.problem.a.as_slice();
        let mut rows = vec![0.0; a.len()];
        for (q, v) in self.active.members().iter().zip(&sol_m[self.problem.m()..]) {
            rows[q.i] += v;
        }
        let res: f64 = rows.iter().zip(a).map(|(r, a)| (r - a).powi(2)).sum();
        let norm: f64 = a.iter().map(|v| v * v).sum();
        res <= 1e-12 * norm
    }
}

/// Computes the semi-relaxed path from λ = 0 to its limit at `+∞`.
pub fn compute_sr_path(problem: &Problem, options: &PathOptions) -> Result<RegularizationPath> {
    let (n, m) = (problem.n(), problem.m());
    if let Some(j) = problem.b.as_slice().iter().position(|&v| !(v > 0.0)) {
        return Err(UotError::Precondition(format!(
            "semi-relaxed path needs positive column masses, b[{j}] = {}",
            problem.b.as_slice()[j]
        )));
    }
    let mut sys = SrSystem {
        problem,
        zeros: vec![0.0; m],
        active: ActiveSet::new(),
        inverse: SymmetricInverse::empty(),
        updates_since_refresh: 0,
        options: *options,
    };
    let mut active = ActiveSet::new();
    let mut pool = HashSet::new();
    for j in 0..m {
        let best = argmin_row(problem, j);
        active.push(FlatIndex::new(best, j, m));
        // At λ = 0 every cheapest entry is a plan value, so all of them are sign-constrained.
        let cmin = problem.cost.get(best, j);
        for i in 0..n {
            if problem.cost.get(i, j) <= cmin {
                pool.insert(i * m + j);
            }
        }
    }
    sys.refresh(&active)?;
    sys.active = active;
    let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |s, x| s.max(x.abs()));
    let scales = Scales {
        cost: max_abs(problem.cost.as_slice()).max(f64::MIN_POSITIVE),
        mass: max_abs(problem.a.as_slice()).max(max_abs(problem.b.as_slice())),
    };
    trace(&mut sys, PathKind::SemiRelaxed, n, 0.0, pool, options, scales)
}

/// Plan on a semi-relaxed path at `lambda`.
pub fn eval_sr_path_at(path: &RegularizationPath, lambda: LambdaValue) -> Result<TransportPlan> {
    if path.kind != PathKind::SemiRelaxed {
        return Err(UotError::Precondition("path is not semi-relaxed".into()));
    }
    path.eval(lambda)
}
