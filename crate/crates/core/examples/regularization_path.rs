//! Exact l2 regularization path: every breakpoint, the active set on each
//! segment, and the plan at any lambda including the balanced limit.

use uot::oracle::{kkt_check, KktKind};
use uot::path::LambdaValue;
use uot::problem::Problem;
use uot::regpath::{compute_path, PathOptions};

fn main() -> uot::Result<()> {
    let problem = Problem::from_rows(
        &[vec![0.3, 1.1, 0.8, 0.2], vec![0.9, 0.1, 0.5, 1.3], vec![0.6, 0.7, 0.05, 0.9]],
        &[0.4, 0.35, 0.25],
        &[0.3, 0.3, 0.2, 0.2],
    )?;
    let path = compute_path(&problem, &PathOptions::default())?;
    println!("{} segments, terminal plan balanced: {}", path.segments.len(), path.terminal_balanced);
    for seg in &path.segments {
        let hi = seg.lambda_hi.map_or("inf".to_string(), |h| format!("{h:.5}"));
        let active: Vec<String> = seg.active.iter().map(|q| format!("({},{})", q.i, q.j)).collect();
        println!("  [{:.5}, {hi}]  active {}", seg.lambda_lo, active.join(" "));
    }

    for lambda in [0.5, 2.0, 10.0] {
        let plan = path.eval(LambdaValue::Finite(lambda))?;
        let kkt = kkt_check(KktKind::Full, &plan, lambda, &problem)?;
        println!(
            "lambda {lambda:>4}: objective {:.6}, mass {:.4}, kkt {:.1e}",
            path.objective_at(&problem, lambda)?,
            plan.total_mass(),
            kkt.max()
        );
    }
    let limit = path.eval(LambdaValue::Infinite)?;
    println!("lambda  inf: transport cost {:.6}", limit.cost(&problem.cost));
    Ok(())
}
