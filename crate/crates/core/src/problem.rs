//! Domain types shared by every solver.
//!
//! Plans and cost matrices are stored row-major: entry `(i, j)` of an
//! `n x m` matrix lives at flat position `i * m + j`. Every module relies on
//! this single convention.

use crate::error::{Result, UotError};

fn check_entries(field: &str, values: &[f64]) -> Result<()> {
    for (k, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(UotError::validation(field, Some(k), "value is not finite"));
        }
        if v < 0.0 {
            return Err(UotError::validation(field, Some(k), format!("negative value {v}")));
        }
    }
    Ok(())
}

/// Non-negative mass vector, one of the two marginals of a transport problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram(Vec<f64>);

impl Histogram {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        Self::named("histogram", weights)
    }

    pub(crate) fn named(field: &str, weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(UotError::validation(field, None, "empty histogram"));
        }
        check_entries(field, &weights)?;
        if weights.iter().all(|&w| w == 0.0) {
            return Err(UotError::validation(field, None, "histogram carries no mass"));
        }
        Ok(Histogram(weights))
    }

    /// Uniform histogram of total mass one.
    pub fn uniform(len: usize) -> Self {
        Histogram(vec![1.0 / len as f64; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn total_mass(&self) -> f64 {
        self.0.iter().sum()
    }
}

impl std::ops::Index<usize> for Histogram {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Dense `n x m` matrix of non-negative finite transport costs.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    m: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(n: usize, m: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * m {
            return Err(UotError::Dimension {
                what: "cost matrix",
                expected: n * m,
                got: data.len(),
            });
        }
        check_entries("cost", &data)?;
        Ok(CostMatrix { n, m, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let (n, m, data) = flatten_rows("cost", rows)?;
        Self::new(n, m, data)
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        self.m
    }

    /// Row-major vectorization `c`.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.m + j]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    pub fn transpose(&self) -> CostMatrix {
        let mut data = vec![0.0; self.n * self.m];
        for i in 0..self.n {
            for j in 0..self.m {
                data[j * self.n + i] = self.data[i * self.m + j];
            }
        }
        CostMatrix {
            n: self.m,
            m: self.n,
            data,
        }
    }
}

pub(crate) fn flatten_rows(field: &str, rows: &[Vec<f64>]) -> Result<(usize, usize, Vec<f64>)> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    let mut data = Vec::with_capacity(n * m);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != m {
            return Err(UotError::validation(
                field,
                Some(i),
                format!("row has {} entries, expected {m}", row.len()),
            ));
        }
        data.extend_from_slice(row);
    }
    Ok((n, m, data))
}

/// Non-negative `n x m` transport plan.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    n: usize,
    m: usize,
    data: Vec<f64>,
}

impl TransportPlan {
    pub fn new(n: usize, m: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * m {
            return Err(UotError::Dimension {
                what: "transport plan",
                expected: n * m,
                got: data.len(),
            });
        }
        check_entries("plan", &data)?;
        Ok(TransportPlan { n, m, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let (n, m, data) = flatten_rows("plan", rows)?;
        Self::new(n, m, data)
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        TransportPlan {
            n,
            m,
            data: vec![0.0; n * m],
        }
    }

    /// Builds a plan from solver output, clamping tiny negative round-off to zero.
    pub(crate) fn from_clamped(n: usize, m: usize, mut data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n * m);
        for v in &mut data {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        TransportPlan { n, m, data }
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        self.m
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.m + j]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.data.chunks(self.m).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.m];
        for row in self.data.chunks(self.m) {
            for (acc, v) in s.iter_mut().zip(row) {
                *acc += v;
            }
        }
        s
    }

    pub fn total_mass(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Frobenius product `<C, T>`.
    pub fn cost(&self, cost: &CostMatrix) -> f64 {
        self.data.iter().zip(cost.as_slice()).map(|(t, c)| t * c).sum()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.m).map(<[f64]>::to_vec).collect()
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &TransportPlan) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    pub fn support(&self) -> Vec<FlatIndex> {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(k, _)| FlatIndex::from_flat(k, self.m))
            .collect()
    }
}

/// Length `n + m` vector: the first `n` entries relate to rows, the last `m` to columns.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedMarginals {
    n: usize,
    values: Vec<f64>,
}

impl StackedMarginals {
    pub fn new(n: usize, m: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n + m {
            return Err(UotError::Dimension {
                what: "stacked marginals",
                expected: n + m,
                got: values.len(),
            });
        }
        Ok(StackedMarginals { n, values })
    }

    /// Stacks the two targets `y = [a; b]`.
    pub fn from_parts(a: &[f64], b: &[f64]) -> Self {
        let mut values = Vec::with_capacity(a.len() + b.len());
        values.extend_from_slice(a);
        values.extend_from_slice(b);
        StackedMarginals { n: a.len(), values }
    }

    pub fn row_part(&self) -> &[f64] {
        &self.values[..self.n]
    }

    pub fn col_part(&self) -> &[f64] {
        &self.values[self.n..]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Position of a plan entry, both as `(i, j)` and as its row-major flat index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlatIndex {
    pub i: usize,
    pub j: usize,
    pub flat: usize,
}

impl FlatIndex {
    pub fn new(i: usize, j: usize, m: usize) -> Self {
        FlatIndex { i, j, flat: i * m + j }
    }

    pub fn from_flat(flat: usize, m: usize) -> Self {
        FlatIndex {
            i: flat / m,
            j: flat % m,
            flat,
        }
    }
}

/// A complete transport problem: costs and both marginals, dimensions checked.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub cost: CostMatrix,
    pub a: Histogram,
    pub b: Histogram,
}

impl Problem {
    pub fn new(cost: CostMatrix, a: Histogram, b: Histogram) -> Result<Self> {
        if a.len() != cost.rows() {
            return Err(UotError::Dimension {
                what: "source histogram a",
                expected: cost.rows(),
                got: a.len(),
            });
        }
        if b.len() != cost.cols() {
            return Err(UotError::Dimension {
                what: "target histogram b",
                expected: cost.cols(),
                got: b.len(),
            });
        }
        Ok(Problem { cost, a, b })
    }

    /// Convenience constructor from nested rows, mostly for tests and examples.
    pub fn from_rows(cost: &[Vec<f64>], a: &[f64], b: &[f64]) -> Result<Self> {
        Self::new(
            CostMatrix::from_rows(cost)?,
            Histogram::named("a", a.to_vec())?,
            Histogram::named("b", b.to_vec())?,
        )
    }

    pub fn n(&self) -> usize {
        self.cost.rows()
    }

    pub fn m(&self) -> usize {
        self.cost.cols()
    }

    /// `vec(a 1_m^T + 1_n b^T)`, i.e. `H^T y`.
    pub fn mass_vector(&self) -> Vec<f64> {
        let (a, b) = (self.a.as_slice(), self.b.as_slice());
        let mut out = Vec::with_capacity(self.n() * self.m());
        for &ai in a {
            out.extend(b.iter().map(|&bj| ai + bj));
        }
        out
    }

    pub fn targets(&self) -> StackedMarginals {
        StackedMarginals::from_parts(self.a.as_slice(), self.b.as_slice())
    }

    pub fn is_balanced(&self, rel_tol: f64) -> bool {
        let (sa, sb) = (self.a.total_mass(), self.b.total_mass());
        (sa - sb).abs() <= rel_tol * sa.max(sb)
    }

    /// Swaps the roles of source and target.
    pub fn transpose(&self) -> Problem {
        Problem {
            cost: self.cost.transpose(),
            a: self.b.clone(),
            b: self.a.clone(),
        }
    }

    pub(crate) fn check_plan(&self, plan: &TransportPlan) -> Result<()> {
        if plan.rows() != self.n() || plan.cols() != self.m() {
            return Err(UotError::Dimension {
                what: "transport plan",
                expected: self.n() * self.m(),
                got: plan.rows() * plan.cols(),
            });
        }
        Ok(())
    }
}
