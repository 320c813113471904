//! Boost a Tweedie mean model directly with the histogram engine.

use zit_tweedie::gbdt::{fit_ensemble, BinnedDataset, BoostConfig, BoostOutcome};
use zit_tweedie::losses::{LossObservation, MuLoss};
use zit_tweedie::simulation::{make_dataset, ExposureLaw, SimulationDesign};
use zit_tweedie::tweedie::PowerParam;

pub fn run_example() -> Result<BoostOutcome, Box<dyn std::error::Error>> {
    let zeta = PowerParam::new(1.5)?;
    let truth = SimulationDesign { mean_pi: 0.01, ..SimulationDesign::default() }.truth_functions()?;
    let (data, _) = make_dataset(5_000, &truth, zeta, ExposureLaw::Unit, 7)?;
    let config = BoostConfig {
        num_trees: 100,
        max_leaves: 15,
        ..BoostConfig::default()
    };
    let binned = BinnedDataset::new(&data.features, config.max_bins);
    let rows: Vec<usize> = (0..data.len()).collect();
    let obs: Vec<LossObservation> = data
        .target
        .iter()
        .zip(&data.exposure)
        .map(|(&y, &w)| LossObservation::new(y, w))
        .collect();
    let out = fit_ensemble(&MuLoss { zeta }, &binned, &rows, &obs, &vec![0.0; rows.len()], &config)?;
    println!(
        "{} trees, loss {:.2} -> {:.2}, stopped: {:?}",
        out.ensemble.n_trees(),
        out.train_loss[0],
        out.train_loss.last().copied().unwrap_or(f64::NAN),
        out.stop
    );
    Ok(out)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()?;
    Ok(())
}
