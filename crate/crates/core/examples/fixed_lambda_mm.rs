//! Multiplicative solvers at a fixed lambda on a small unbalanced problem.
//!
//! ```text
//! cargo run --example fixed_lambda_mm
//! ```

use uot::divergence::PenaltyWeights;
use uot::mm::{solve_mm, MmConfig, MmUpdate};
use uot::problem::Problem;

fn main() -> uot::Result<()> {
    let problem = Problem::from_rows(
        &[vec![0.0, 1.0, 4.0], vec![1.0, 0.0, 1.0], vec![4.0, 1.0, 0.0]],
        &[0.5, 0.3, 0.4],
        &[0.2, 0.6, 0.2],
    )?;
    let config = MmConfig {
        record_trace: true,
        ..MmConfig::default()
    };
    let updates = [
        ("kl", MmUpdate::Kl { lambda: 1.0 }),
        ("l2", MmUpdate::L2 { lambda: 1.0 }),
        ("l2-alt", MmUpdate::L2Alt { lambda: 0.5 }),
        ("ruot", MmUpdate::Ruot { weights: PenaltyWeights::new(1.0, 5.0, 0.01)? }),
    ];
    for (name, update) in updates {
        let report = solve_mm(&problem, update, &config)?;
        let trace = report.objective_trace.as_deref().unwrap_or_default();
        println!(
            "{name:>6}: {} iterations, objective {:.6} -> {:.6}, marginal errors ({:.2e}, {:.2e})",
            report.iterations,
            trace.first().copied().unwrap_or(f64::NAN),
            report.final_objective,
            report.marginal_errors.0,
            report.marginal_errors.1,
        );
        for row in report.plan.to_rows() {
            println!("        {}", row.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join("  "));
        }
    }
    // l2-alt at lambda minimizes the l2 objective at 2 lambda, so the two l2 rows agree.
    Ok(())
}
