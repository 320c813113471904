//! Under-sample positive responses: 10,296 rows, 61.1% zeros, keep 15%.

use zit_tweedie::io::undersample_rows;

pub const POPULATION: usize = 10_296;
pub const ZEROS: usize = 6_291;

pub fn run_example() -> Result<Vec<f64>, Box<dyn std::error::Error>> {
    let target: Vec<f64> = (0..POPULATION).map(|i| if i < ZEROS { 0.0 } else { 1.0 + i as f64 }).collect();
    let zeros = target.iter().filter(|&&y| y == 0.0).count();
    let mut shares = Vec::new();
    for seed in 0..10 {
        let kept = undersample_rows(&target, 0.15, seed)?;
        let kept_zeros = kept.iter().filter(|&&i| target[i] == 0.0).count();
        shares.push(kept_zeros as f64 / kept.len() as f64);
    }
    let mean = shares.iter().sum::<f64>() / shares.len() as f64;
    println!("zeros before: {zeros} of {POPULATION} ({:.2}%)", 100.0 * zeros as f64 / POPULATION as f64);
    println!("zero share after: {:.2}%", 100.0 * mean);
    Ok(shares)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()?;
    Ok(())
}
