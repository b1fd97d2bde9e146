//! Matrix-free design operator `H = [H_r; H_c]`.
//!
//! `H t` stacks the row sums and column sums of the plan, `H^T s` broadcasts
//! `s_a[i] + s_b[j]` back onto the grid and `H^T H t` is the composition of the
//! two. None of them allocates more than `O(n m)`.

use crate::error::{Result, UotError};
use crate::problem::{StackedMarginals, TransportPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DesignOperator {
    n: usize,
    m: usize,
}

impl DesignOperator {
    pub fn new(n: usize, m: usize) -> Self {
        DesignOperator { n, m }
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        self.m
    }

    fn check_len(&self, what: &'static str, expected: usize, got: usize) -> Result<()> {
        if expected != got {
            return Err(UotError::Dimension { what, expected, got });
        }
        Ok(())
    }

    /// `H t = [T 1_m; T^T 1_n]`.
    pub fn apply(&self, plan: &TransportPlan) -> Result<StackedMarginals> {
        if plan.rows() != self.n || plan.cols() != self.m {
            return Err(UotError::Dimension {
                what: "plan for design operator",
                expected: self.n * self.m,
                got: plan.rows() * plan.cols(),
            });
        }
        let values = self.apply_slice(plan.as_slice())?;
        StackedMarginals::new(self.n, self.m, values)
    }

    /// Same as [`apply`](Self::apply) on a raw row-major vector.
    pub fn apply_slice(&self, t: &[f64]) -> Result<Vec<f64>> {
        self.check_len("vectorized plan", self.n * self.m, t.len())?;
        let mut out = vec![0.0; self.n + self.m];
        let (rows, cols) = out.split_at_mut(self.n);
        for (i, row) in t.chunks_exact(self.m).enumerate() {
            let mut acc = 0.0;
            for (j, &v) in row.iter().enumerate() {
                acc += v;
                cols[j] += v;
            }
            rows[i] = acc;
        }
        Ok(out)
    }

    /// `H^T s = vec(s_a 1_m^T + 1_n s_b^T)`.
    pub fn adjoint(&self, s: &StackedMarginals) -> Result<Vec<f64>> {
        self.adjoint_slice(s.as_slice())
    }

    pub fn adjoint_slice(&self, s: &[f64]) -> Result<Vec<f64>> {
        self.check_len("stacked marginals", self.n + self.m, s.len())?;
        let (sa, sb) = s.split_at(self.n);
        let mut out = Vec::with_capacity(self.n * self.m);
        for &ai in sa {
            out.extend(sb.iter().map(|&bj| ai + bj));
        }
        Ok(out)
    }

    /// `H^T H t`: entry `(i, j)` is row-sum `i` plus column-sum `j` of `T`.
    pub fn gram(&self, t: &[f64]) -> Result<Vec<f64>> {
        let ht = self.apply_slice(t)?;
        self.adjoint_slice(&ht)
    }

    /// Entry of `H^T H` between flat positions `(i, j)` and `(k, l)`.
    pub fn gram_entry(i: usize, j: usize, k: usize, l: usize) -> f64 {
        (i == k) as u8 as f64 + (j == l) as u8 as f64
    }
}
