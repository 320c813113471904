//! Tweedie density pieces: point mass at zero, series normalizer, deviance.

use zit_tweedie::tweedie::{
    log_density_tweedie, log_normalizer, prob_zero, saddle_point_normalizer, unit_deviance, PowerParam, TweedieParams,
};

pub struct DensitySummary {
    pub prob_zero: f64,
    pub log_density_at_one: f64,
    pub normalizer: f64,
    pub saddle_point: f64,
    pub deviance: f64,
}

pub fn run_example() -> Result<DensitySummary, Box<dyn std::error::Error>> {
    let zeta = PowerParam::new(1.5)?;
    let params = TweedieParams::new(2.0, 1.0, zeta)?;
    let summary = DensitySummary {
        prob_zero: prob_zero(2.0, 1.0, zeta),
        log_density_at_one: log_density_tweedie(1.0, &params, 1.0)?,
        normalizer: log_normalizer(1.0, 0.01, zeta)?,
        saddle_point: saddle_point_normalizer(1.0, 0.01, zeta),
        deviance: unit_deviance(2.0, 1.0, zeta),
    };
    println!("P(Y=0) at mu=2 phi=1 zeta=1.5: {:.6}", summary.prob_zero);
    println!("log f(1): {:.6}", summary.log_density_at_one);
    println!("series c(1, 0.01): {:.6}  saddle point: {:.6}", summary.normalizer, summary.saddle_point);
    println!("D(2; 1): {:.12} (12 - 8 sqrt 2 = {:.12})", summary.deviance, 12.0 - 8.0 * 2f64.sqrt());
    Ok(summary)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()?;
    Ok(())
}
