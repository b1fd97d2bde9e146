//! Certify a fast solver against the slow reference: projected gradient on
//! the same objective, plus the optimality residuals of both plans.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use uot::mm::{solve_mm, MmConfig, MmUpdate};
use uot::oracle::{kkt_check, projected_gradient_l2, KktKind};
use uot::problem::Problem;

fn main() -> uot::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (n, m) = (5, 6);
    let cost: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
    let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let b: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
    let problem = Problem::from_rows(&cost, &a, &b)?;

    let lambda = 1.5;
    let config = MmConfig {
        max_iters: 1_000_000,
        rel_tol: 1e-16,
        plan_tol: Some(1e-14),
        ..MmConfig::default()
    };
    let mm = solve_mm(&problem, MmUpdate::L2 { lambda }, &config)?;
    let oracle = projected_gradient_l2(&problem, lambda, 1e-13, 1_000_000)?;
    println!("mm-l2: {} iterations, converged {}", mm.iterations, mm.converged);
    println!("oracle: {} iterations", oracle.iterations);
    println!("max |difference| = {:.2e}", mm.plan.max_abs_diff(&oracle.plan));
    for (name, plan) in [("mm-l2", &mm.plan), ("oracle", &oracle.plan)] {
        let r = kkt_check(KktKind::Full, plan, lambda, &problem)?;
        println!("{name:>7} residuals {r:?}");
    }
    Ok(())
}
