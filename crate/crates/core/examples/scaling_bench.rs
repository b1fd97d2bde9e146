//! Time the path solver over growing sizes and fit `time ~ n^k`.
//!
//! ```text
//! cargo run --release --example scaling_bench -- 20,40,60,80
//! ```

use uot::bench::{fit_exponent, run_scaling, write_csv, BenchSolver};

fn main() -> uot::Result<()> {
    let sizes: Vec<usize> = match std::env::args().nth(1) {
        Some(list) => list.split(',').map(|s| s.trim().parse().expect("sizes are integers")).collect(),
        None => vec![10, 20, 30, 40, 50],
    };
    for solver in [BenchSolver::Path, BenchSolver::SrPath, BenchSolver::MmL2 { lambda: 1.0 }] {
        let records = run_scaling(solver, &sizes, 3, 0)?;
        let (exponent, r2) = fit_exponent(&records)?;
        println!("{solver:>7}: exponent {exponent:.2}, r^2 {r2:.3}");
        if solver == BenchSolver::Path {
            write_csv(std::io::stdout().lock(), &records)?;
        }
    }
    Ok(())
}
