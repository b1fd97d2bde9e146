//! Bregman divergences and the homogeneity that lets marginal weights be
//! absorbed into the divergence arguments.

use uot::divergence::{bregman, DivergenceKind};

fn main() -> uot::Result<()> {
    let u = [0.2, 0.5, 0.0];
    let v = [0.3, 0.4, 0.1];
    for kind in [DivergenceKind::Kl, DivergenceKind::QuadraticL2] {
        let alpha = kind.homogeneity_exponent();
        let d = bregman(kind, &u, &v)?;
        for w in [0.5f64, 3.0] {
            let s = w.powf(alpha);
            let scaled_u: Vec<f64> = u.iter().map(|x| s * x).collect();
            let scaled_v: Vec<f64> = v.iter().map(|x| s * x).collect();
            println!(
                "{kind:?}: {w} * D = {:.6}, D(scaled) = {:.6}",
                w * d,
                bregman(kind, &scaled_u, &scaled_v)?
            );
        }
    }
    Ok(())
}
