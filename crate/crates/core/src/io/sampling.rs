use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Keep every zero row and a seeded simple random sample of
/// `round(keep_fraction * m)` of the `m` positive rows. Row order is preserved.
pub fn undersample_nonzero(data: &Dataset, keep_fraction: f64, seed: u64) -> Result<Dataset> {
    Ok(data.select(&undersample_rows(&data.target, keep_fraction, seed)?))
}

/// Indices of the rows [`undersample_nonzero`] keeps, in increasing order.
pub fn undersample_rows(target: &[f64], keep_fraction: f64, seed: u64) -> Result<Vec<usize>> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::invalid(format!("keep fraction must lie in (0, 1], got {keep_fraction}")));
    }
    let positive: Vec<usize> = (0..target.len()).filter(|&i| target[i] > 0.0).collect();
    let keep = (keep_fraction * positive.len() as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![false; target.len()];
    for k in index::sample(&mut rng, positive.len(), keep) {
        chosen[positive[k]] = true;
    }
    Ok((0..target.len()).filter(|&i| target[i] == 0.0 || chosen[i]).collect())
}

/// Seeded split into `(train, test)` with `round(test_fraction * n)` test rows.
pub fn train_test_split(data: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!("test fraction must lie in (0, 1), got {test_fraction}")));
    }
    let n_test = (test_fraction * data.len() as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut is_test = vec![false; data.len()];
    for i in index::sample(&mut rng, data.len(), n_test) {
        is_test[i] = true;
    }
    let train: Vec<usize> = (0..data.len()).filter(|&i| !is_test[i]).collect();
    let test: Vec<usize> = (0..data.len()).filter(|&i| is_test[i]).collect();
    Ok((data.select(&train), data.select(&test)))
}
