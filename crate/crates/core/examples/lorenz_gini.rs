//! Ordered Lorenz curve and Gini index for two premium rankings.

use zit_tweedie::metrics::{ordered_lorenz_gini, LorenzCurve};

pub fn run_example() -> Result<(LorenzCurve, LorenzCurve), Box<dyn std::error::Error>> {
    let losses = [0.0, 0.0, 1.0, 0.0, 4.0, 0.0, 9.0, 2.0];
    let good = [0.5, 0.4, 1.5, 0.6, 3.0, 0.3, 6.0, 1.8];
    let reversed: Vec<f64> = good.iter().map(|p| 1.0 / p).collect();
    let base = [1.0; 8];
    let weights = [1.0; 8];
    let sharp = ordered_lorenz_gini(&good, &losses, &base, &weights)?;
    let poor = ordered_lorenz_gini(&reversed, &losses, &base, &weights)?;
    println!("gini with the informative premium: {:.4}", sharp.gini);
    println!("gini with the reversed premium: {:.4}", poor.gini);
    for p in &sharp.points {
        println!("  {:.3} {:.3}", p.premium_share, p.loss_share);
    }
    Ok((sharp, poor))
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()?;
    Ok(())
}
