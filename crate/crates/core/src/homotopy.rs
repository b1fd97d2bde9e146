//! Breakpoint tracking shared by the full and semi-relaxed paths.
//!
//! A system keeps an active set and the inverse of its linear system. Between
//! breakpoints the active unknowns are `sol_m − sol_c/λ`. At a breakpoint the
//! entries sitting at zero (leaving actives, entering candidates) are resolved
//! by a Lawson–Hanson pass on the local direction problem
//! `min ½ dᵀG d − rᵀd` with `d ≥ 0` on those entries and free elsewhere,
//! which handles ties and degenerate crossings without guessing an order.

use std::collections::HashSet;

use log::debug;

use crate::error::{Result, UotError};
use crate::path::{next_event, Candidate, MultiplierCoefficients, PathKind, PathSegment, RegularizationPath, TIE_RTOL};
use crate::problem::FlatIndex;
use crate::regpath::{ActiveSet, PathOptions};

/// Relative tolerance deciding that a plan entry or a multiplier sits at zero at a breakpoint.
const ZERO_RTOL: f64 = 1e-9;
/// Relative tolerance on activation numerators and denominators.
const TERM_RTOL: f64 = 1e-10;

pub(crate) trait ActiveSystem {
    fn cols(&self) -> usize;
    fn active(&self) -> &ActiveSet;
    /// Number of leading unknowns that are not plan entries (column multipliers).
    fn extra(&self) -> usize;
    fn add(&mut self, q: FlatIndex) -> Result<()>;
    fn remove(&mut self, flat: usize) -> Result<()>;
    fn schur_complement(&self, q: FlatIndex) -> f64;
    /// Solutions for the mass and cost right-hand sides, multipliers first.
    fn solve(&self) -> (Vec<f64>, Vec<f64>);
    /// Evaluator of `(N, D)`: the off-support multiplier is `N/λ − D`.
    fn terms(&self, sol_m: &[f64], sol_c: &[f64]) -> Terms<'_>;
    /// Whether the unbounded last segment reaches the penalized marginals.
    fn balanced_limit(&self, sol_m: &[f64]) -> bool;
}

/// Activation terms in separable form:
/// `N_ij = c_ij − nr_i − nc_j` and `D_ij = mr_i + mc_j − dr_i − dc_j`.
pub(crate) struct Terms<'a> {
    pub cols: usize,
    pub cost: &'a [f64],
    pub mass_row: &'a [f64],
    pub mass_col: &'a [f64],
    pub num_row: Vec<f64>,
    pub num_col: Vec<f64>,
    pub den_row: Vec<f64>,
    pub den_col: Vec<f64>,
}

impl Terms<'_> {
    #[inline]
    pub fn at(&self, flat: usize) -> (f64, f64) {
        self.at_ij(flat / self.cols, flat % self.cols)
    }

    #[inline]
    pub fn at_ij(&self, i: usize, j: usize) -> (f64, f64) {
        let num = self.cost[i * self.cols + j] - self.num_row[i] - self.num_col[j];
        let den = self.mass_row[i] + self.mass_col[j] - self.den_row[i] - self.den_col[j];
        (num, den)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Scales {
    pub cost: f64,
    pub mass: f64,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |s, x| s.max(x.abs())).max(f64::MIN_POSITIVE)
}

/// Step ratio of Lawson–Hanson's interpolation towards `z` for position `p`.
fn step_ratio(d: f64, z: f64) -> f64 {
    if d - z > 0.0 {
        d / (d - z)
    } else {
        0.0
    }
}

/// Lawson–Hanson on the local direction problem. `pool` holds the
/// sign-constrained entries (active or not); every other active entry is free.
/// With `use_mass` the mass right-hand side drives the problem (start at λ = 0).
fn resolve<S: ActiveSystem>(
    sys: &mut S,
    pool: &HashSet<usize>,
    use_mass: bool,
    scales: Scales,
    threshold: f64,
) -> Result<()> {
    let scale = if use_mass { scales.mass } else { scales.cost };
    let direction = |sys: &S| {
        let (sm, sc) = sys.solve();
        let v = if use_mass { sm } else { sc };
        v[sys.extra()..].to_vec()
    };
    let mut candidates: Vec<usize> = pool.iter().copied().collect();
    candidates.sort_unstable();
    let mut rejected: HashSet<usize> = HashSet::new();
    let mut d = direction(sys);
    let budget = 8 * candidates.len() + 16;
    for _ in 0..budget {
        let (sm, sc) = sys.solve();
        let terms = sys.terms(&sm, &sc);
        let grad = |f: usize| {
            let (num, den) = terms.at(f);
            if use_mass {
                den
            } else {
                num
            }
        };
        let best = candidates
            .iter()
            .copied()
            .filter(|f| !sys.active().contains(*f) && !rejected.contains(f))
            .map(|f| (grad(f), f))
            .filter(|&(g, _)| g > TERM_RTOL * scale)
            .fold(None, |best: Option<(f64, usize)>, (g, f)| match best {
                Some((bg, b)) if bg >= g => Some((bg, b)),
                _ => Some((g, f)),
            });
        drop(terms);
        let Some((_, flat)) = best else {
            return Ok(());
        };
        let q = FlatIndex::from_flat(flat, sys.cols());
        if sys.schur_complement(q).abs() < threshold {
            debug!("entry ({}, {}) is linearly dependent on the active set, leaving it out", q.i, q.j);
            rejected.insert(flat);
            continue;
        }
        sys.add(q)?;
        d.push(0.0);
        loop {
            let z = direction(sys);
            let zmax = max_abs(&z);
            let members: Vec<usize> = sys.active().members().iter().map(|p| p.flat).collect();
            let bad: Vec<usize> = (0..z.len())
                .filter(|&p| pool.contains(&members[p]) && z[p] <= 1e-12 * zmax)
                .collect();
            if bad.is_empty() {
                d = z;
                break;
            }
            let alpha = bad
                .iter()
                .map(|&p| step_ratio(d[p], z[p]))
                .fold(f64::INFINITY, f64::min)
                .clamp(0.0, 1.0);
            for p in 0..d.len() {
                d[p] += alpha * (z[p] - d[p]);
            }
            let dmax = max_abs(&d);
            let mut drop: Vec<usize> = bad.iter().copied().filter(|&p| d[p] <= 1e-12 * dmax).collect();
            if drop.is_empty() {
                let tight = bad
                    .iter()
                    .copied()
                    .min_by(|&x, &y| step_ratio(d[x], z[x]).total_cmp(&step_ratio(d[y], z[y])))
                    .expect("non-empty");
                drop.push(tight);
            }
            for &p in drop.iter().rev() {
                sys.remove(members[p])?;
                d.remove(p);
            }
        }
    }
    Err(UotError::Cycling {
        lambda: f64::NAN,
        active_len: sys.active().len(),
    })
}

/// Follows the path upwards from `lambda0`, where the entries in `pool` are tied.
pub(crate) fn trace<S: ActiveSystem>(
    sys: &mut S,
    kind: PathKind,
    n: usize,
    lambda0: f64,
    pool: HashSet<usize>,
    options: &PathOptions,
    scales: Scales,
) -> Result<RegularizationPath> {
    let m = sys.cols();
    let extra = sys.extra();
    resolve(sys, &pool, lambda0 == 0.0, scales, options.singular_threshold)?;

    let mut path = RegularizationPath {
        kind,
        n,
        m,
        segments: Vec::new(),
        terminal_balanced: false,
        complete: false,
        coincident_events: 0,
    };
    let mut lambda_k = lambda0;
    let mut seen: HashSet<(u64, Vec<usize>)> = HashSet::new();

    while path.segments.len() < options.max_segments {
        let mut key: Vec<usize> = sys.active().members().iter().map(|q| q.flat).collect();
        key.sort_unstable();
        if !seen.insert((lambda_k.to_bits(), key)) {
            return Err(UotError::Cycling {
                lambda: lambda_k,
                active_len: sys.active().len(),
            });
        }

        let (sol_m, sol_c) = sys.solve();
        let (mt, ct) = (&sol_m[extra..], &sol_c[extra..]);
        let floor = lambda_k * (1.0 + TIE_RTOL);

        let mut removals: Vec<Candidate> = Vec::new();
        for (pos, q) in sys.active().members().iter().enumerate() {
            if ct[pos] < -TERM_RTOL * scales.cost && mt[pos] < -TERM_RTOL * scales.mass {
                let r = ct[pos] / mt[pos];
                if r > floor {
                    removals.push((r, q.flat));
                }
            }
        }
        let terms = sys.terms(&sol_m, &sol_c);
        let mut additions: Vec<Candidate> = Vec::new();
        for (i, j) in (0..n).flat_map(|i| (0..m).map(move |j| (i, j))) {
            let f = i * m + j;
            if sys.active().contains(f) {
                continue;
            }
            let (num, den) = terms.at_ij(i, j);
            if den <= TERM_RTOL * scales.mass || num <= TERM_RTOL * scales.cost {
                continue;
            }
            let r = num / den;
            if r > floor {
                additions.push((r, f));
            }
        }

        let event = next_event(&removals, &additions);
        let multipliers = (extra > 0).then(|| MultiplierCoefficients {
            m_tilde: sol_m[..extra].to_vec(),
            c_tilde: sol_c[..extra].to_vec(),
        });
        let segment = PathSegment {
            lambda_lo: lambda_k,
            lambda_hi: event.as_ref().map(|e| e.lambda),
            active: sys.active().members().to_vec(),
            m_tilde: mt.to_vec(),
            c_tilde: ct.to_vec(),
            multipliers,
        };
        let Some(event) = event else {
            path.terminal_balanced = sys.balanced_limit(&sol_m);
            path.segments.push(segment);
            path.complete = true;
            break;
        };
        path.segments.push(segment);

        let lambda = event.lambda;
        if !event.removals.is_empty() && !event.additions.is_empty() {
            path.coincident_events += 1;
            debug!(
                "coincident removal and addition at lambda={lambda} ({} out, {} in)",
                event.removals.len(),
                event.additions.len()
            );
        }

        // Entries at zero when the path reaches `lambda`.
        let mut pool: HashSet<usize> = event.removals.iter().chain(&event.additions).copied().collect();
        for (pos, q) in sys.active().members().iter().enumerate() {
            let t = mt[pos] - ct[pos] / lambda;
            if t.abs() <= ZERO_RTOL * (mt[pos].abs() + ct[pos].abs() / lambda) + TERM_RTOL * scales.mass {
                pool.insert(q.flat);
            }
        }
        let gamma_floor = TERM_RTOL * (scales.cost + lambda * scales.mass);
        for (i, j) in (0..n).flat_map(|i| (0..m).map(move |j| (i, j))) {
            let f = i * m + j;
            if sys.active().contains(f) {
                continue;
            }
            let (num, den) = terms.at_ij(i, j);
            let gamma = num - lambda * den;
            if gamma.abs() <= ZERO_RTOL * (num.abs() + lambda * den.abs()) + gamma_floor {
                pool.insert(f);
            }
        }
        drop(terms);
        let mut leaving: Vec<usize> = pool.iter().copied().filter(|f| sys.active().contains(*f)).collect();
        leaving.sort_unstable();
        for flat in leaving {
            sys.remove(flat)?;
        }
        resolve(sys, &pool, false, scales, options.singular_threshold)?;
        lambda_k = lambda;
    }
    Ok(path)
}
