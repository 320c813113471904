//! One EM cycle by hand: initialize, posterior responsibilities, M-step.

use zit_tweedie::em::{e_step, initialize, m_step, EmConfig};
use zit_tweedie::simulation::{make_dataset, ExposureLaw, SimulationDesign};
use zit_tweedie::tweedie::PowerParam;

pub fn run_example() -> Result<(f64, f64), Box<dyn std::error::Error>> {
    let zeta = PowerParam::new(1.5)?;
    let truth = SimulationDesign::default().truth_functions()?;
    let (data, _) = make_dataset(5_000, &truth, zeta, ExposureLaw::Unit, 5)?;
    let config = EmConfig { trees_per_m_step: 10, ..EmConfig::default() };
    let init = initialize(&data, zeta, &config)?;
    let before = init.model.log_likelihood(&data)?;
    println!("init: mu0={:.4} phi0={:.4} pi0={:.4}", init.mu0, init.phi0_hat, init.pi0_hat);

    let posterior = e_step(&data, &init.model)?;
    let zeros = posterior.responsibilities.iter().filter(|&&r| r > 0.0).count();
    println!("{zeros} zero rows with positive responsibility");

    let step = m_step(&data, &posterior, &init.model, &config)?;
    let after = step.apply(&init.model, 1.0).log_likelihood(&data)?;
    println!("log-likelihood {before:.2} -> {after:.2}");
    Ok((before, after))
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()?;
    Ok(())
}
