//! Gaussian clouds with a few far-away target points. Balanced transport must
//! feed the outliers; along the l2 path they stay empty until lambda is large
//! enough to pay for the trip.

use uot::path::LambdaValue;
use uot::regpath::{compute_path, PathOptions};
use uot::synth::{gaussian_problem, GaussianSpec};

fn main() -> uot::Result<()> {
    let generated = gaussian_problem(&GaussianSpec::new(30, 30, 2, 4).with_outliers(3, 10.0))?;
    let problem = &generated.problem;
    let path = compute_path(problem, &PathOptions::default())?;
    let balanced = path.eval(LambdaValue::Infinite)?;
    println!("outliers: {:?}", generated.outliers);
    for lambda in [1.0, 5.0, 20.0, 100.0] {
        let plan = path.eval(LambdaValue::Finite(lambda))?;
        let cols = plan.col_sums();
        let on_outliers: f64 = generated.outliers.iter().map(|&j| cols[j]).sum();
        println!("lambda {lambda:>5}: mass {:.3}, on outliers {on_outliers:.4}", plan.total_mass());
    }
    let cols = balanced.col_sums();
    let on_outliers: f64 = generated.outliers.iter().map(|&j| cols[j]).sum();
    println!("balanced:      mass {:.3}, on outliers {on_outliers:.4}", balanced.total_mass());
    Ok(())
}
