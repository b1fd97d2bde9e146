//! Path with the column marginals held exactly and only the rows penalized.
//! It starts at lambda = 0 from the column-wise cheapest assignment.

use uot::oracle::{kkt_check, KktKind};
use uot::path::LambdaValue;
use uot::problem::Problem;
use uot::regpath::PathOptions;
use uot::srpath::{compute_sr_path, sr_initial_plan};

fn main() -> uot::Result<()> {
    let problem = Problem::from_rows(
        &[vec![0.2, 0.9, 0.4], vec![0.7, 0.1, 0.3], vec![0.5, 0.6, 0.8]],
        &[0.2, 0.5, 0.6],
        &[0.5, 0.3, 0.4],
    )?;
    println!("start plan {:?}", sr_initial_plan(&problem).to_rows());
    let path = compute_sr_path(&problem, &PathOptions::default())?;
    println!("breakpoints {:?}", path.breakpoints());
    for lambda in [0.1, 1.0, 10.0] {
        let plan = path.eval(LambdaValue::Finite(lambda))?;
        let kkt = kkt_check(KktKind::SemiRelaxed, &plan, lambda, &problem)?;
        let u = path.multipliers_at(LambdaValue::Finite(lambda))?.unwrap_or_default();
        println!(
            "lambda {lambda:>4}: rows {:?} cols {:?} multipliers {:?} kkt {:.1e}",
            rounded(&plan.row_sums()),
            rounded(&plan.col_sums()),
            rounded(&u),
            kkt.max()
        );
    }
    Ok(())
}

fn rounded(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 1e4).round() / 1e4).collect()
}
