//! Balanced transport three ways: proximal point iterations, the l2 path
//! limit and brute-force vertex enumeration.

use uot::mm::{ipot_solve, IpotConfig};
use uot::oracle::balanced_ot_bruteforce;
use uot::path::LambdaValue;
use uot::problem::Problem;
use uot::regpath::{compute_path, PathOptions};

fn main() -> uot::Result<()> {
    let problem = Problem::from_rows(
        &[vec![0.0, 2.0, 1.0], vec![2.0, 0.0, 1.5], vec![1.0, 1.5, 0.0]],
        &[0.5, 0.3, 0.2],
        &[0.2, 0.4, 0.4],
    )?;
    let (lp_cost, _) = balanced_ot_bruteforce(&problem)?;
    let path_plan = compute_path(&problem, &PathOptions::default())?.eval(LambdaValue::Infinite)?;
    println!("vertex enumeration  {lp_cost:.8}");
    println!("path limit          {:.8}", path_plan.cost(&problem.cost));
    for iters in [10, 100, 1000] {
        let plan = ipot_solve(&problem, &IpotConfig::new(0.1, iters))?;
        println!("ipot {iters:>5} steps    {:.8}", plan.cost(&problem.cost));
    }
    Ok(())
}
