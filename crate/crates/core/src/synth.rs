//! Seeded synthetic problems: two Gaussian clouds with optional target outliers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, UotError};
use crate::ioformat::{cost_from_points, Metric, ProblemFile};
use crate::problem::{Histogram, Problem};

/// Outlier noise is drawn from the standard normal truncated to this radius,
/// so every outlier lies at least `shift − OUTLIER_RADIUS` from the target mean.
pub const OUTLIER_RADIUS: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSpec {
    pub n: usize,
    pub m: usize,
    pub dim: usize,
    pub seed: u64,
    pub metric: Metric,
    pub outliers: usize,
    pub outlier_shift: f64,
    /// Distance between the two cloud means along the first axis.
    pub mean_gap: f64,
}

impl GaussianSpec {
    pub fn new(n: usize, m: usize, dim: usize, seed: u64) -> Self {
        GaussianSpec {
            n,
            m,
            dim,
            seed,
            metric: Metric::SqEuclidean,
            outliers: 0,
            outlier_shift: 0.0,
            mean_gap: 1.0,
        }
    }

    pub fn with_outliers(mut self, count: usize, shift: f64) -> Self {
        self.outliers = count;
        self.outlier_shift = shift;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianProblem {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub target_mean: Vec<f64>,
    /// Indices of the shifted target points (the last `outliers` ones).
    pub outliers: Vec<usize>,
    pub problem: Problem,
    pub metric: Metric,
}

impl GaussianProblem {
    pub fn to_file(&self) -> ProblemFile {
        let mut file = ProblemFile::from_points(
            self.x.clone(),
            self.y.clone(),
            self.metric,
            self.problem.a.as_slice().to_vec(),
            self.problem.b.as_slice().to_vec(),
        );
        file.outliers = (!self.outliers.is_empty()).then(|| self.outliers.clone());
        file
    }
}

fn normal_point(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

/// Source cloud `N(0, I)`, target cloud `N(μ, I)` with `μ = mean_gap · e₁`, uniform
/// unit masses. The last `outliers` targets are moved by `outlier_shift · e₁`.
pub fn gaussian_problem(spec: &GaussianSpec) -> Result<GaussianProblem> {
    if spec.n == 0 || spec.m == 0 || spec.dim == 0 {
        return Err(UotError::Domain("n, m and dim must be at least 1".into()));
    }
    if spec.outliers > spec.m {
        return Err(UotError::Domain(format!("{} outliers requested among {} targets", spec.outliers, spec.m)));
    }
    if !(spec.outlier_shift >= 0.0) || !spec.outlier_shift.is_finite() {
        return Err(UotError::Domain(format!("outlier shift must be finite and non-negative, got {}", spec.outlier_shift)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut target_mean = vec![0.0; spec.dim];
    target_mean[0] = spec.mean_gap;
    let x: Vec<Vec<f64>> = (0..spec.n).map(|_| normal_point(&mut rng, spec.dim)).collect();
    let first_outlier = spec.m - spec.outliers;
    let mut y = Vec::with_capacity(spec.m);
    for j in 0..spec.m {
        let mut z = normal_point(&mut rng, spec.dim);
        if j >= first_outlier {
            while z.iter().map(|v| v * v).sum::<f64>() > OUTLIER_RADIUS * OUTLIER_RADIUS {
                z = normal_point(&mut rng, spec.dim);
            }
            z[0] += spec.outlier_shift;
        }
        y.push(z.iter().zip(&target_mean).map(|(v, mu)| v + mu).collect());
    }
    let cost = cost_from_points(&x, &y, spec.metric)?;
    let problem = Problem::new(cost, Histogram::uniform(spec.n), Histogram::uniform(spec.m))?;
    Ok(GaussianProblem {
        x,
        y,
        target_mean,
        outliers: (first_outlier..spec.m).collect(),
        problem,
        metric: spec.metric,
    })
}
