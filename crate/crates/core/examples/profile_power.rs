//! Choose the Tweedie power by profile likelihood over a grid.

use zit_tweedie::em::EmConfig;
use zit_tweedie::profile::{fit_profile, ProfileResult, ZetaGrid};
use zit_tweedie::simulation::{make_dataset, ExposureLaw, TruthFunctions};
use zit_tweedie::tweedie::PowerParam;

pub fn run_example() -> Result<ProfileResult, Box<dyn std::error::Error>> {
    let truth = TruthFunctions::constant(2, 2.0, 1.0, 0.3)?;
    let (data, _) = make_dataset(20_000, &truth, PowerParam::new(1.5)?, ExposureLaw::Unit, 9)?;
    let grid = ZetaGrid::range(1.3, 1.7, 0.1)?;
    let result = fit_profile(&data, &grid, &EmConfig::constant_only())?;
    for row in &result.table {
        println!("zeta {:.2}: loglik {:.3}", row.zeta, row.loglik);
    }
    println!("selected zeta {:.2}", result.best_zeta.value());
    Ok(result)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()?;
    Ok(())
}
