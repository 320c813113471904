//! Recover constant (pi, mu, phi) from simulated data with intercept-only trees.

use zit_tweedie::em::{fit, EmConfig, ZitModel, ZitPrediction};
use zit_tweedie::simulation::{make_dataset, ExposureLaw, TruthFunctions};
use zit_tweedie::tweedie::PowerParam;

pub const TRUTH: (f64, f64, f64) = (0.3, 2.0, 1.0);

/// Fitted model, its (constant) prediction and the row count.
pub type Fit = (ZitModel, ZitPrediction, usize);

pub fn recover(seed: u64) -> Result<Fit, Box<dyn std::error::Error>> {
    let zeta = PowerParam::new(1.5)?;
    let (pi, mu, phi) = TRUTH;
    let truth = TruthFunctions::constant(2, mu, phi, pi)?;
    let (data, _) = make_dataset(50_000, &truth, zeta, ExposureLaw::Unit, seed)?;
    let model = fit(&data, zeta, &EmConfig::constant_only())?;
    let pred = model.predict(&data.features.to_vector(0))?;
    Ok((model, pred, data.len()))
}

pub fn run_example() -> Result<Vec<Fit>, Box<dyn std::error::Error>> {
    let mut out = Vec::new();
    for seed in 0..5 {
        let (model, pred, n) = recover(seed)?;
        println!(
            "seed {seed}: pi={:.4} mu={:.4} phi={:.4} iterations={}",
            pred.pi, pred.mu, pred.phi, model.training_meta.em_iterations_run
        );
        out.push((model, pred, n));
    }
    Ok(out)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()?;
    Ok(())
}
