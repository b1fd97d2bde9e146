//! Incremental inverse of a symmetric matrix under bordering and deletion.
//!
//! Growing the matrix by one row/column uses the Schur complement
//! `S = d - b^T M^{-1} b`; deleting row/column `q` uses
//! `M'^{-1} = M^{-1}_{-q,-q} - M^{-1}_{-q,q} M^{-1}_{q,-q} / M^{-1}_{qq}`.

use nalgebra::{DMatrix, DVector};

/// Dense symmetric inverse kept in sync with an ordered set of variables.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricInverse {
    inverse: DMatrix<f64>,
}

impl SymmetricInverse {
    pub fn empty() -> Self {
        SymmetricInverse {
            inverse: DMatrix::zeros(0, 0),
        }
    }

    pub fn dim(&self) -> usize {
        self.inverse.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    /// Inverts `matrix` directly. Returns `None` when it is numerically singular.
    pub fn factorize(matrix: DMatrix<f64>, positive_definite: bool) -> Option<Self> {
        let k = matrix.nrows();
        if k == 0 {
            return Some(Self::empty());
        }
        let inverse = if positive_definite {
            matrix.clone().cholesky()?.inverse()
        } else {
            matrix.clone().lu().try_inverse()?
        };
        let residual = (&matrix * &inverse - DMatrix::<f64>::identity(k, k)).amax();
        if !(residual <= 1e-8) {
            return None;
        }
        Some(SymmetricInverse { inverse })
    }

    /// Schur complement of a prospective new variable with coupling `border` and diagonal `diag`.
    pub fn schur_complement(&self, border: &[f64], diag: f64) -> f64 {
        let w = &self.inverse * DVector::from_column_slice(border);
        diag - border.iter().zip(w.iter()).map(|(b, x)| b * x).sum::<f64>()
    }

    /// Appends a variable. Returns the Schur complement, or `Err(s)` without
    /// modifying anything when `|s| < threshold`.
    pub fn append(&mut self, border: &[f64], diag: f64, threshold: f64) -> Result<f64, f64> {
        let k = self.dim();
        debug_assert_eq!(border.len(), k);
        let w = &self.inverse * DVector::from_column_slice(border);
        let s = diag - border.iter().zip(w.iter()).map(|(b, x)| b * x).sum::<f64>();
        if !(s.abs() >= threshold) {
            return Err(s);
        }
        self.inverse.resize_mut(k + 1, k + 1, 0.0);
        {
            let mut top = self.inverse.view_mut((0, 0), (k, k));
            top.ger(1.0 / s, &w, &w, 1.0);
        }
        for r in 0..k {
            self.inverse[(r, k)] = -w[r] / s;
            self.inverse[(k, r)] = -w[r] / s;
        }
        self.inverse[(k, k)] = 1.0 / s;
        Ok(s)
    }

    /// Removes the variable at `pos`. Returns the pivot, or `Err(pivot)` without
    /// modifying anything when `|pivot| < threshold`.
    pub fn remove(&mut self, pos: usize, threshold: f64) -> Result<f64, f64> {
        let pivot = self.inverse[(pos, pos)];
        if !(pivot.abs() >= threshold) {
            return Err(pivot);
        }
        let col = self.inverse.column(pos).clone_owned();
        self.inverse.ger(-1.0 / pivot, &col, &col, 1.0);
        let inverse = std::mem::replace(&mut self.inverse, DMatrix::zeros(0, 0));
        self.inverse = inverse.remove_column(pos).remove_row(pos);
        Ok(pivot)
    }

    /// Relative residual `‖M (M^{-1} v) − v‖∞ / ‖v‖∞` for a fixed probe `v`,
    /// with `M` given as a matrix-free product.
    pub fn probe_residual(&self, apply: impl Fn(&[f64]) -> Vec<f64>) -> f64 {
        let k = self.dim();
        if k == 0 {
            return 0.0;
        }
        let probe: Vec<f64> = (0..k)
            .map(|p| ((p as u64).wrapping_mul(2654435761) % 1000) as f64 / 1000.0 - 0.4995)
            .collect();
        let x = self.solve(&probe);
        let back = apply(&x);
        let norm = probe.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        back.iter().zip(&probe).fold(0.0f64, |s, (b, v)| s.max((b - v).abs())) / norm
    }

    /// `M^{-1} v`.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        (&self.inverse * DVector::from_column_slice(rhs)).iter().copied().collect()
    }

    /// `M^{-1} v` and `M^{-1} w` in one sweep over the inverse.
    pub fn solve_pair(&self, v: &[f64], w: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let k = self.dim();
        let data = self.inverse.as_slice();
        let mut out_v = Vec::with_capacity(k);
        let mut out_w = Vec::with_capacity(k);
        // Symmetric: row r equals column r, which is contiguous.
        for col in data.chunks_exact(k.max(1)).take(k) {
            let (mut sv, mut sw) = (0.0, 0.0);
            for ((x, a), b) in col.iter().zip(v).zip(w) {
                sv += x * a;
                sw += x * b;
            }
            out_v.push(sv);
            out_w.push(sw);
        }
        (out_v, out_w)
    }
}
