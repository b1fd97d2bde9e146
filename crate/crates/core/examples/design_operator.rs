//! The marginal operator `t -> [T 1; T^T 1]`, its adjoint and the Gram product,
//! all without forming the `(n + m) x nm` matrix.

use uot::operator::DesignOperator;
use uot::problem::{StackedMarginals, TransportPlan};

fn main() -> uot::Result<()> {
    let plan = TransportPlan::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]])?;
    let op = DesignOperator::new(2, 2);
    let marginals = op.apply(&plan)?;
    println!("H t       = {:?}", marginals.as_slice());
    println!("H^T s     = {:?}", op.adjoint(&StackedMarginals::from_parts(&[1.0, 2.0], &[10.0, 20.0]))?);
    println!("H^T H t   = {:?}", op.gram(plan.as_slice())?);

    let big = DesignOperator::new(100, 100);
    let t = vec![1.0; big.rows() * big.cols()];
    let start = std::time::Instant::now();
    let g = big.gram(&t)?;
    println!("100 x 100 Gram product in {:?}, first entry {}", start.elapsed(), g[0]);
    Ok(())
}
