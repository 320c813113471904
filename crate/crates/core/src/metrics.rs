//! Hold-out metrics: squared and absolute error, Tweedie deviance and the
//! ordered Lorenz curve with its Gini index.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureVector};
use crate::em::ZitModel;
use crate::error::{Error, Result};
use crate::tweedie::{unit_deviance, PowerParam};

/// Expected response per unit exposure, `(1 - pi(x)) mu(x)`.
pub fn pure_premium(model: &ZitModel, x: &FeatureVector) -> Result<f64> {
    Ok(model.predict(x)?.pure_premium())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointMetrics {
    pub mse: f64,
    pub mad: f64,
    pub mean_deviance: f64,
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, found })
    }
}

/// Weighted MSE, MAD and mean unit deviance of `predictions` against `actuals`.
pub fn point_metrics(predictions: &[f64], actuals: &[f64], weights: &[f64], zeta: PowerParam) -> Result<PointMetrics> {
    check_len(predictions.len(), actuals.len())?;
    check_len(predictions.len(), weights.len())?;
    if let Some(w) = weights.iter().find(|&&w| !(w > 0.0)) {
        return Err(Error::invalid(format!("metric weights must be positive, got {w}")));
    }
    if let Some(p) = predictions.iter().find(|&&p| !(p > 0.0 && p.is_finite())) {
        return Err(Error::invalid(format!("predictions must be positive, got {p}")));
    }
    let (mut se, mut ae, mut dev, mut sw) = (0.0, 0.0, 0.0, 0.0);
    for ((&p, &y), &w) in predictions.iter().zip(actuals).zip(weights) {
        se += w * (p - y) * (p - y);
        ae += w * (p - y).abs();
        dev += w * unit_deviance(y, p, zeta);
        sw += w;
    }
    if !(sw > 0.0) {
        return Err(Error::DegenerateWeighting);
    }
    Ok(PointMetrics {
        mse: se / sw,
        mad: ae / sw,
        mean_deviance: dev / sw,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorenzPoint {
    pub premium_share: f64,
    pub loss_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorenzCurve {
    pub gini: f64,
    pub points: Vec<LorenzPoint>,
}

/// Ordered Lorenz curve of `losses` against `base_premiums`, with policies
/// sorted by `premiums / base_premiums`. Policies with equal relativity form
/// one segment, so constant relativities give the diagonal.
pub fn ordered_lorenz_gini(premiums: &[f64], losses: &[f64], base_premiums: &[f64], weights: &[f64]) -> Result<LorenzCurve> {
    let n = premiums.len();
    check_len(n, losses.len())?;
    check_len(n, base_premiums.len())?;
    check_len(n, weights.len())?;
    for i in 0..n {
        if !(premiums[i] > 0.0) || !(base_premiums[i] > 0.0) {
            return Err(Error::invalid(format!("row {i}: premiums must be positive")));
        }
        if !(losses[i] >= 0.0) {
            return Err(Error::invalid(format!("row {i}: loss must be non-negative")));
        }
        if !(weights[i] > 0.0) {
            return Err(Error::invalid(format!("row {i}: weight must be positive")));
        }
    }
    let total_base: f64 = (0..n).map(|i| weights[i] * base_premiums[i]).sum();
    let total_loss: f64 = (0..n).map(|i| weights[i] * losses[i]).sum();
    if !(total_loss > 0.0) {
        return Err(Error::Degenerate("total loss is zero; the Lorenz curve is undefined".into()));
    }
    if !(total_base > 0.0) {
        return Err(Error::Degenerate("total premium is zero; the Lorenz curve is undefined".into()));
    }

    let relativity: Vec<f64> = (0..n).map(|i| premiums[i] / base_premiums[i]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| relativity[a].total_cmp(&relativity[b]).then(a.cmp(&b)));

    let mut points = vec![LorenzPoint { premium_share: 0.0, loss_share: 0.0 }];
    let (mut cum_base, mut cum_loss) = (0.0, 0.0);
    let mut area = 0.0;
    let mut k = 0;
    while k < n {
        let r = relativity[order[k]];
        while k < n && relativity[order[k]] == r {
            let i = order[k];
            cum_base += weights[i] * base_premiums[i];
            cum_loss += weights[i] * losses[i];
            k += 1;
        }
        let last = *points.last().expect("curve starts at the origin");
        let next = if k == n {
            LorenzPoint { premium_share: 1.0, loss_share: 1.0 }
        } else {
            LorenzPoint {
                premium_share: (cum_base / total_base).min(1.0),
                loss_share: (cum_loss / total_loss).min(1.0),
            }
        };
        area += 0.5 * (next.premium_share - last.premium_share) * (next.loss_share + last.loss_share);
        points.push(next);
    }
    Ok(LorenzCurve {
        gini: 1.0 - 2.0 * area,
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum GiniWeighting {
    #[default]
    Exposure,
    Count,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mse: f64,
    pub mad: f64,
    pub mean_deviance: f64,
    pub gini: f64,
    pub lorenz: Vec<LorenzPoint>,
}

impl MetricsReport {
    /// `key=value` lines.
    pub fn to_key_value(&self) -> String {
        format!(
            "mse={}\nmad={}\nmean_deviance={}\ngini={}\nlorenz_points={}\n",
            self.mse,
            self.mad,
            self.mean_deviance,
            self.gini,
            self.lorenz.len()
        )
    }
}

/// Metrics of `premiums` on `data`, with a constant base premium for the Gini.
pub fn evaluate_premiums(premiums: &[f64], data: &Dataset, zeta: PowerParam, weighting: GiniWeighting) -> Result<MetricsReport> {
    let point = point_metrics(premiums, &data.target, &data.exposure, zeta)?;
    let base = data.weighted_mean();
    let base = if base > 0.0 { base } else { 1.0 };
    let weights = match weighting {
        GiniWeighting::Exposure => data.exposure.clone(),
        GiniWeighting::Count => vec![1.0; data.len()],
    };
    let curve = ordered_lorenz_gini(premiums, &data.target, &vec![base; data.len()], &weights)?;
    Ok(MetricsReport {
        mse: point.mse,
        mad: point.mad,
        mean_deviance: point.mean_deviance,
        gini: curve.gini,
        lorenz: curve.points,
    })
}

pub fn evaluate_model(model: &ZitModel, data: &Dataset, weighting: GiniWeighting) -> Result<MetricsReport> {
    let premiums: Vec<f64> = model.predict_dataset(data)?.iter().map(|p| p.pure_premium()).collect();
    evaluate_premiums(&premiums, data, model.zeta, weighting)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn z() -> PowerParam {
        PowerParam::new(1.5).unwrap()
    }

    #[test]
    fn perfect_predictions() {
        let y = [0.5, 1.0, 3.0];
        let m = point_metrics(&y, &y, &[1.0; 3], z()).unwrap();
        assert_eq!((m.mse, m.mad, m.mean_deviance), (0.0, 0.0, 0.0));
    }

    #[test]
    fn hand_arithmetic() {
        let m = point_metrics(&[1.0, 1.0], &[0.0, 2.0], &[1.0, 1.0], z()).unwrap();
        assert_eq!(m.mse, 1.0);
        assert_eq!(m.mad, 1.0);
        let expected = (unit_deviance(0.0, 1.0, z()) + unit_deviance(2.0, 1.0, z())) / 2.0;
        assert_relative_eq!(m.mean_deviance, expected, epsilon = 1e-12);
        assert!(point_metrics(&[1.0], &[1.0, 2.0], &[1.0], z()).is_err());
    }

    #[test]
    fn two_policy_curve() {
        let c = ordered_lorenz_gini(&[1.0, 2.0], &[0.0, 1.0], &[1.0, 1.0], &[1.0, 1.0]).unwrap();
        let pts: Vec<(f64, f64)> = c.points.iter().map(|p| (p.premium_share, p.loss_share)).collect();
        assert_eq!(pts, vec![(0.0, 0.0), (0.5, 0.0), (1.0, 1.0)]);
        assert_eq!(c.gini, 0.5);
        let r = ordered_lorenz_gini(&[2.0, 1.0], &[0.0, 1.0], &[1.0, 1.0], &[1.0, 1.0]).unwrap();
        assert_eq!(r.gini, -0.5);
    }

    #[test]
    fn constant_relativity_is_the_diagonal() {
        let c = ordered_lorenz_gini(&[2.0, 4.0, 6.0], &[5.0, 0.0, 1.0], &[1.0, 2.0, 3.0], &[1.0, 2.0, 1.0]).unwrap();
        assert_eq!(c.gini, 0.0);
        assert_eq!(c.points.len(), 2);
    }

    #[test]
    fn zero_losses_are_an_error() {
        assert!(ordered_lorenz_gini(&[1.0], &[0.0], &[1.0], &[1.0]).is_err());
    }
}
