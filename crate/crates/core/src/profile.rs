//! Profile-likelihood choice of the power parameter over a grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::em::{fit, EmConfig, TrainingMeta, ZitModel};
use crate::error::{Error, Result};
use crate::tweedie::PowerParam;

/// Strictly increasing candidate power parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ZetaGrid(Vec<PowerParam>);

impl ZetaGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("power grid is empty"));
        }
        if values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("power grid must be strictly increasing"));
        }
        Ok(Self(values.into_iter().map(PowerParam::new).collect::<Result<_>>()?))
    }

    /// `start, start + step, ...` up to `stop` inclusive (to rounding).
    pub fn range(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(stop >= start) {
            return Err(Error::invalid(format!("bad power grid {start}:{stop}:{step}")));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        // round to 12 decimals so 1.3 + 2 * 0.1 prints as 1.5
        let values = (0..count)
            .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
            .collect();
        Self::new(values)
    }

    pub fn values(&self) -> &[PowerParam] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for ZetaGrid {
    fn default() -> Self {
        Self::range(1.1, 1.9, 0.1).expect("default grid is valid")
    }
}

impl TryFrom<Vec<f64>> for ZetaGrid {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ZetaGrid> for Vec<f64> {
    fn from(g: ZetaGrid) -> Vec<f64> {
        g.0.into_iter().map(f64::from).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub zeta: f64,
    pub loglik: f64,
}

#[derive(Debug, Clone)]
pub struct ProfileResult {
    pub best_zeta: PowerParam,
    pub best_model: ZitModel,
    pub table: Vec<ProfileRow>,
    /// Training metadata of every grid fit, aligned with `table`.
    pub training: Vec<TrainingMeta>,
}

impl ProfileResult {
    pub fn best_loglik(&self) -> f64 {
        self.best_model.training_meta.final_loglik
    }
}

/// Fit at every grid point and keep the one with the largest exact
/// training log-likelihood; ties go to the smaller power.
pub fn fit_profile(data: &Dataset, grid: &ZetaGrid, config: &EmConfig) -> Result<ProfileResult> {
    config.validate()?;
    let fits: Vec<ZitModel> = grid
        .values()
        .par_iter()
        .map(|&zeta| {
            fit(data, zeta, config).map_err(|e| Error::Profile {
                zeta: zeta.value(),
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let table: Vec<ProfileRow> = fits
        .iter()
        .map(|m| ProfileRow {
            zeta: m.zeta.value(),
            loglik: m.training_meta.final_loglik,
        })
        .collect();
    let mut best = 0;
    for (k, row) in table.iter().enumerate().skip(1) {
        if row.loglik > table[best].loglik {
            best = k;
        }
    }
    let training = fits.iter().map(|m| m.training_meta.clone()).collect();
    let best_model = fits.into_iter().nth(best).expect("grid is nonempty");
    Ok(ProfileResult {
        best_zeta: best_model.zeta,
        best_model,
        table,
        training,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(ZetaGrid::new(vec![]).is_err());
        assert!(ZetaGrid::new(vec![1.5, 1.4]).is_err());
        assert!(ZetaGrid::new(vec![1.5, 2.0]).is_err());
        let g = ZetaGrid::range(1.3, 1.7, 0.1).unwrap();
        let v: Vec<f64> = g.values().iter().map(|z| z.value()).collect();
        assert_eq!(v, vec![1.3, 1.4, 1.5, 1.6, 1.7]);
        assert_eq!(ZetaGrid::default().len(), 9);
    }
}
