//! Per-row losses with their analytic gradients and Hessians.

use zit_tweedie::losses::{loss_init_positive, loss_mu, loss_phi, loss_pi, GradHess};
use zit_tweedie::tweedie::PowerParam;

pub type LossRow = (&'static str, f64, GradHess);

pub fn run_example() -> Result<Vec<LossRow>, Box<dyn std::error::Error>> {
    let zeta = PowerParam::new(1.5)?;
    let rows = vec![
        ("zero-state", loss_pi(0.3, 1.2)),
        ("mean", loss_mu(2.0, 1.0, 0.5, zeta)),
        ("dispersion", loss_phi(1.3, 1.0, 0.2)),
        ("positive-tweedie", loss_init_positive(2.0, 1.0, 0.5, zeta)),
    ];
    let out: Vec<_> = rows.into_iter().map(|(name, (v, gh))| (name, v, gh)).collect();
    for (name, v, gh) in &out {
        println!("{name:>16}: value {v:.8} grad {:.8} hess {:.8}", gh.grad, gh.hess);
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()?;
    Ok(())
}
