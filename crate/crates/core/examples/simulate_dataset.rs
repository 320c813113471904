//! Draw random truth functions and a zero-inflated Tweedie dataset.

use zit_tweedie::data::Dataset;
use zit_tweedie::simulation::{make_dataset, ExposureLaw, SimulationDesign, TruthRow};
use zit_tweedie::tweedie::PowerParam;

pub fn run_example() -> Result<(Dataset, Vec<TruthRow>), Box<dyn std::error::Error>> {
    let zeta = PowerParam::new(1.5)?;
    let truth = SimulationDesign { seed: 3, ..SimulationDesign::default() }.truth_functions_for_zero_rate(zeta, 0.6)?;
    let (data, table) = make_dataset(10_000, &truth, zeta, ExposureLaw::uniform_default(), 11)?;
    let expected_zero: f64 = table.iter().map(|r| r.zero_probability(zeta)).sum::<f64>() / table.len() as f64;
    let mean_pi = table.iter().map(|r| r.pi).sum::<f64>() / table.len() as f64;
    println!("rows {} features {}", data.len(), truth.p);
    println!("observed zero share {:.4}, expected {:.4}", data.zero_fraction(), expected_zero);
    println!("mean zero-state probability {mean_pi:.4}");
    Ok((data, table))
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()?;
    Ok(())
}
