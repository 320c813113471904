//! Tweedie, zero-truncated Tweedie and zero-inflated Tweedie densities.
//!
//! Everything here works on the log scale. For a power parameter
//! `1 < zeta < 2` the Tweedie law is a compound Poisson sum of gamma
//! claims: a point mass at zero plus a continuous density on `(0, inf)`
//! whose normalizer `c(y, phi, zeta)` is an infinite series, evaluated
//! outward from its largest term.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Lower bound applied to `mu` and `phi` before any power is taken.
pub const PARAM_FLOOR: f64 = 1e-10;

/// Terms are added until they fall below this fraction of the largest one.
const SERIES_REL_CUTOFF: f64 = 1e-17;

/// Upper bound on the number of series terms evaluated per call.
pub const SERIES_TERM_BUDGET: usize = 20_000;

/// Tweedie power parameter, strictly inside `(1, 2)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PowerParam(f64);

impl PowerParam {
    pub fn new(zeta: f64) -> Result<Self> {
        if zeta > 1.0 && zeta < 2.0 {
            Ok(Self(zeta))
        } else {
            Err(Error::invalid(format!(
                "power parameter must lie strictly inside (1, 2), got {zeta}"
            )))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// Shape of the per-claim gamma law, `(2 - zeta) / (zeta - 1)`.
    #[inline]
    pub fn gamma_shape(self) -> f64 {
        gamma_shape(self)
    }
}

impl TryFrom<f64> for PowerParam {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<PowerParam> for f64 {
    fn from(p: PowerParam) -> f64 {
        p.0
    }
}

impl std::fmt::Display for PowerParam {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Mean (per unit exposure), dispersion and power of a Tweedie law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TweedieParams {
    pub mu: f64,
    pub phi: f64,
    pub zeta: PowerParam,
}

impl TweedieParams {
    pub fn new(mu: f64, phi: f64, zeta: PowerParam) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::invalid(format!("mu must be positive, got {mu}")));
        }
        if !(phi > 0.0 && phi.is_finite()) {
            return Err(Error::invalid(format!("phi must be positive, got {phi}")));
        }
        Ok(Self { mu, phi, zeta })
    }
}

/// Zero-inflated Tweedie: a perfect zero with probability `pi`, otherwise Tweedie.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZitParams {
    pub pi: f64,
    pub tweedie: TweedieParams,
}

impl ZitParams {
    pub fn new(pi: f64, tweedie: TweedieParams) -> Result<Self> {
        if !(0.0..1.0).contains(&pi) {
            return Err(Error::invalid(format!("pi must lie in [0, 1), got {pi}")));
        }
        Ok(Self { pi, tweedie })
    }
}

/// Function values on the link scale: `mu = exp(f_mu)`, `phi = exp(f_phi)`,
/// `pi = logistic(f_pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LinkScores {
    pub f_mu: f64,
    pub f_phi: f64,
    pub f_pi: f64,
}

impl LinkScores {
    pub fn mu(&self) -> f64 {
        self.f_mu.exp()
    }

    pub fn phi(&self) -> f64 {
        self.f_phi.exp()
    }

    pub fn pi(&self) -> f64 {
        logistic(self.f_pi)
    }
}

/// `log(1 + exp(x))` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return 0.0;
    }
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `log(exp(a) + exp(b))`, tolerating `-inf` arguments.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Gamma shape `alpha = (2 - zeta) / (zeta - 1)`.
#[inline]
pub fn gamma_shape(zeta: PowerParam) -> f64 {
    let z = zeta.value();
    (2.0 - z) / (z - 1.0)
}

/// Expected claim count `mu^(2-zeta) / (phi' (2-zeta))` for effective dispersion `phi'`.
#[inline]
pub fn zero_rate(mu: f64, phi_over_w: f64, zeta: PowerParam) -> f64 {
    let z = zeta.value();
    let mu = mu.max(PARAM_FLOOR);
    let phi = phi_over_w.max(PARAM_FLOOR);
    mu.powf(2.0 - z) / (phi * (2.0 - z))
}

/// `Pr(Y = 0)` under `Tweedie(mu, phi', zeta)`.
pub fn prob_zero(mu: f64, phi_over_w: f64, zeta: PowerParam) -> f64 {
    (-zero_rate(mu, phi_over_w, zeta)).exp()
}

/// The series normalizer `c(y, phi, zeta)` for `y > 0`.
///
/// Term `j` of the series is
/// `y^(j a) / (phi^(j (1 + a)) (2 - zeta)^j (zeta - 1)^(j a) j! Gamma(j a))`
/// with `a` the gamma shape. Summation starts at the approximate mode
/// `j* = y^(2-zeta) / ((2 - zeta) phi)` and walks both ways until terms drop
/// below `1e-17` of the largest one.
pub fn log_normalizer(y: f64, phi: f64, zeta: PowerParam) -> Result<f64> {
    if !(y > 0.0 && y.is_finite()) {
        return Err(Error::invalid(format!("normalizer needs y > 0, got {y}")));
    }
    let phi = phi.max(PARAM_FLOOR);
    let z = zeta.value();
    let alpha = gamma_shape(zeta);
    let per_term = alpha * y.ln()
        - (1.0 + alpha) * phi.ln()
        - (2.0 - z).ln()
        - alpha * (z - 1.0).ln();
    let log_term = |j: f64| j * per_term - ln_gamma(j + 1.0) - ln_gamma(j * alpha);

    let mode = (y.powf(2.0 - z) / ((2.0 - z) * phi)).round().max(1.0);
    if !mode.is_finite() || mode > 1e15 {
        return Err(Error::SeriesDiverged {
            y,
            phi,
            zeta: z,
            terms: 0,
        });
    }
    let cutoff = SERIES_REL_CUTOFF.ln();
    let reference = log_term(mode);
    let mut peak = reference;
    let mut sum = 1.0;
    let mut terms = 1usize;

    let mut j = mode + 1.0;
    loop {
        let l = log_term(j);
        peak = peak.max(l);
        if l - peak < cutoff {
            break;
        }
        sum += (l - reference).exp();
        terms += 1;
        if terms >= SERIES_TERM_BUDGET {
            return Err(Error::SeriesDiverged {
                y,
                phi,
                zeta: z,
                terms,
            });
        }
        j += 1.0;
    }

    let mut j = mode - 1.0;
    while j >= 1.0 {
        let l = log_term(j);
        peak = peak.max(l);
        if l - peak < cutoff {
            break;
        }
        sum += (l - reference).exp();
        terms += 1;
        if terms >= SERIES_TERM_BUDGET {
            return Err(Error::SeriesDiverged {
                y,
                phi,
                zeta: z,
                terms,
            });
        }
        j -= 1.0;
    }

    Ok(reference + sum.ln() - y.ln())
}

/// Saddle-point approximation to the normalizer:
/// `-log(2 pi phi y^zeta) / 2 - y^(2-zeta) / (phi (1-zeta) (2-zeta))`.
pub fn saddle_point_normalizer(y: f64, phi: f64, zeta: PowerParam) -> f64 {
    let z = zeta.value();
    let at_mean = y.powf(2.0 - z) / ((1.0 - z) * (2.0 - z));
    -0.5 * (2.0 * std::f64::consts::PI * phi * y.powf(z)).ln() - at_mean / phi
}

/// Exponential-family part `(w/phi) (y mu^(1-zeta)/(1-zeta) - mu^(2-zeta)/(2-zeta))`.
#[inline]
fn canonical_part(y: f64, mu: f64, phi: f64, w: f64, zeta: PowerParam) -> f64 {
    let z = zeta.value();
    let mu = mu.max(PARAM_FLOOR);
    let phi = phi.max(PARAM_FLOOR);
    let cumulant = mu.powf(2.0 - z) / (2.0 - z);
    if y == 0.0 {
        -(w / phi) * cumulant
    } else {
        (w / phi) * (y * mu.powf(1.0 - z) / (1.0 - z) - cumulant)
    }
}

/// Log density (mass at zero) of `Tweedie(mu, phi/w, zeta)` at `y`.
pub fn log_density_tweedie(y: f64, params: &TweedieParams, w: f64) -> Result<f64> {
    if y < 0.0 {
        return Err(Error::invalid(format!("negative response {y}")));
    }
    let canonical = canonical_part(y, params.mu, params.phi, w, params.zeta);
    if y == 0.0 {
        return Ok(canonical);
    }
    let phi = params.phi.max(PARAM_FLOOR);
    Ok(canonical + log_normalizer(y, phi / w, params.zeta)?)
}

/// Log density of the zero-truncated Tweedie law at `y > 0`.
pub fn log_density_positive_tweedie(y: f64, params: &TweedieParams, w: f64) -> Result<f64> {
    if !(y > 0.0) {
        return Err(Error::invalid(format!(
            "zero-truncated density needs y > 0, got {y}"
        )));
    }
    let rate = zero_rate(params.mu, params.phi / w, params.zeta);
    // log(1 - exp(-rate))
    let log_positive = (-(-rate).exp_m1()).ln();
    Ok(log_density_tweedie(y, params, w)? - log_positive)
}

/// Tweedie unit deviance `D(y; mu)`.
pub fn unit_deviance(y: f64, mu: f64, zeta: PowerParam) -> f64 {
    let z = zeta.value();
    let mu = mu.max(PARAM_FLOOR);
    let mu_2 = mu.powf(2.0 - z) / (2.0 - z);
    if y == 0.0 {
        return 2.0 * mu_2;
    }
    let d = 2.0
        * (y * (y.powf(1.0 - z) - mu.powf(1.0 - z)) / (1.0 - z)
            - (y.powf(2.0 - z) / (2.0 - z) - mu_2));
    d.max(0.0)
}

/// Log-likelihood contribution of one observation under the zero-inflated model.
pub fn zit_log_density(y: f64, w: f64, scores: &LinkScores, zeta: PowerParam) -> Result<f64> {
    let log_pi = -softplus(-scores.f_pi);
    let log_not_pi = -softplus(scores.f_pi);
    let params = TweedieParams {
        mu: scores.mu(),
        phi: scores.phi(),
        zeta,
    };
    let tweedie = log_density_tweedie(y, &params, w)?;
    if y == 0.0 {
        Ok(log_add_exp(log_pi, log_not_pi + tweedie))
    } else {
        Ok(log_not_pi + tweedie)
    }
}

/// Observed-data log-likelihood of the zero-inflated Tweedie model.
///
/// Rows are evaluated in parallel; the sum runs in row order so the result
/// does not depend on the thread count.
pub fn zit_log_likelihood(
    y: &[f64],
    w: &[f64],
    scores: &[LinkScores],
    zeta: PowerParam,
) -> Result<f64> {
    if y.len() != w.len() {
        return Err(Error::LengthMismatch {
            expected: y.len(),
            found: w.len(),
        });
    }
    if y.len() != scores.len() {
        return Err(Error::LengthMismatch {
            expected: y.len(),
            found: scores.len(),
        });
    }
    let terms: Vec<f64> = (0..y.len())
        .into_par_iter()
        .map(|i| zit_log_density(y[i], w[i], &scores[i], zeta))
        .collect::<Result<_>>()?;
    Ok(terms.iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn z(v: f64) -> PowerParam {
        PowerParam::new(v).unwrap()
    }

    #[test]
    fn power_param_domain() {
        assert!(PowerParam::new(1.0).is_err());
        assert!(PowerParam::new(2.0).is_err());
        assert!(PowerParam::new(f64::NAN).is_err());
        assert!(PowerParam::new(1.0001).is_ok());
    }

    #[test]
    fn gamma_shape_values() {
        assert_relative_eq!(gamma_shape(z(1.5)), 1.0, epsilon = 1e-15);
        assert_relative_eq!(gamma_shape(z(4.0 / 3.0)), 2.0, epsilon = 1e-14);
        assert_relative_eq!(gamma_shape(z(1.9)), 0.1 / 0.9, epsilon = 1e-14);
    }

    #[test]
    fn prob_zero_values() {
        assert_relative_eq!(prob_zero(1.0, 1.0, z(1.5)), (-2.0f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(prob_zero(4.0, 2.0, z(1.5)), (-2.0f64).exp(), epsilon = 1e-15);
        assert!(prob_zero(1e-300, 1.0, z(1.5)) > 0.9999);
    }

    #[test]
    fn prob_zero_monotone() {
        let zeta = z(1.4);
        let mut last = 1.0;
        for k in 1..50 {
            let p = prob_zero(0.1 * k as f64, 1.0, zeta);
            assert!(p < last);
            last = p;
        }
        let mut last = 0.0;
        for k in 1..50 {
            let p = prob_zero(1.0, 0.1 * k as f64, zeta);
            assert!(p > last);
            last = p;
        }
    }

    #[test]
    fn zero_density_is_linear_in_exposure() {
        let p = TweedieParams::new(1.0, 1.0, z(1.5)).unwrap();
        assert_relative_eq!(log_density_tweedie(0.0, &p, 1.0).unwrap(), -2.0, epsilon = 1e-15);
        assert_relative_eq!(log_density_tweedie(0.0, &p, 2.0).unwrap(), -4.0, epsilon = 1e-15);
    }

    #[test]
    fn deviance_values() {
        assert_eq!(unit_deviance(1.0, 1.0, z(1.5)), 0.0);
        assert_relative_eq!(unit_deviance(0.0, 1.0, z(1.5)), 4.0, epsilon = 1e-14);
        // 2 * int_1^2 (2 - t) t^-1.5 dt
        assert_relative_eq!(unit_deviance(2.0, 1.0, z(1.5)), 0.686_291_501_015_239_2, epsilon = 1e-12);
    }

    #[test]
    fn saddle_point_close_for_small_dispersion() {
        let zeta = z(1.5);
        let c = log_normalizer(1.0, 0.01, zeta).unwrap();
        let s = saddle_point_normalizer(1.0, 0.01, zeta);
        assert!(((c - s) / c).abs() < 0.05, "c={c} saddle={s}");
        // the approximation error itself is O(phi)
        assert!((c - s).abs() < 0.05, "c={c} saddle={s}");
    }

    #[test]
    fn truncated_density_relation() {
        let p = TweedieParams::new(1.0, 1.0, z(1.5)).unwrap();
        let full = log_density_tweedie(1.3, &p, 1.0).unwrap();
        let trunc = log_density_positive_tweedie(1.3, &p, 1.0).unwrap();
        assert_relative_eq!(trunc, full - (1.0 - (-2.0f64).exp()).ln(), epsilon = 1e-13);

        let p = TweedieParams::new(100.0, 0.1, z(1.5)).unwrap();
        let full = log_density_tweedie(90.0, &p, 1.0).unwrap();
        let trunc = log_density_positive_tweedie(90.0, &p, 1.0).unwrap();
        assert!((full - trunc).abs() < 1e-12);
    }

    #[test]
    fn zit_single_observation() {
        let zeta = z(1.5);
        let s = LinkScores { f_mu: 0.0, f_phi: 0.0, f_pi: 0.0 };
        let ll = zit_log_likelihood(&[0.0], &[1.0], &[s], zeta).unwrap();
        assert_relative_eq!(ll, (0.5 + 0.5 * (-2.0f64).exp()).ln(), epsilon = 1e-14);
        assert_relative_eq!(ll, -0.566_219_17, epsilon = 1e-8);

        let ll = zit_log_likelihood(&[1.3], &[1.0], &[s], zeta).unwrap();
        let p = TweedieParams::new(1.0, 1.0, zeta).unwrap();
        let expected = 0.5f64.ln() + log_density_tweedie(1.3, &p, 1.0).unwrap();
        assert_relative_eq!(ll, expected, epsilon = 1e-14);
    }

    #[test]
    fn zit_reduces_to_tweedie_without_inflation() {
        let zeta = z(1.6);
        let y = [0.0, 0.4, 2.5, 0.0];
        let w = [1.0, 0.5, 2.0, 1.5];
        let s: Vec<_> = (0..4)
            .map(|i| LinkScores {
                f_mu: 0.1 * i as f64,
                f_phi: -0.2,
                f_pi: f64::NEG_INFINITY,
            })
            .collect();
        let ll = zit_log_likelihood(&y, &w, &s, zeta).unwrap();
        let plain: f64 = (0..4)
            .map(|i| {
                let p = TweedieParams::new(s[i].mu(), s[i].phi(), zeta).unwrap();
                log_density_tweedie(y[i], &p, w[i]).unwrap()
            })
            .sum();
        assert_eq!(ll, plain);
    }

    #[test]
    fn normalizer_rejects_non_positive_y() {
        assert!(log_normalizer(0.0, 1.0, z(1.5)).is_err());
    }
}
