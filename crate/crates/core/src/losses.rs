//! Per-observation boosting objectives: value, gradient and Hessian with
//! respect to the link-scale score `F`.
//!
//! The constant `-log(2 pi y^zeta / w) / 2` of the extended quasi-likelihood is
//! left out of the mean and dispersion losses, so reported loss values are
//! only comparable within one fit.

use serde::{Deserialize, Serialize};

use crate::tweedie::{logistic, softplus, unit_deviance, PowerParam};

/// Floor applied to the analytic Hessian of the initialization loss.
pub const INIT_HESS_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossObservation {
    pub target: f64,
    pub weight: f64,
    /// Loss-specific constant; the exposure for [`InitPositiveLoss`].
    pub aux: f64,
}

impl LossObservation {
    pub fn new(target: f64, weight: f64) -> Self {
        Self {
            target,
            weight,
            aux: 1.0,
        }
    }

    pub fn with_aux(target: f64, weight: f64, aux: f64) -> Self {
        Self { target, weight, aux }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GradHess {
    pub grad: f64,
    pub hess: f64,
}

/// A twice-differentiable objective in the link-scale score.
pub trait Loss: Sync {
    fn name(&self) -> &'static str;

    fn evaluate(&self, obs: &LossObservation, score: f64) -> (f64, GradHess);

    fn value(&self, obs: &LossObservation, score: f64) -> f64 {
        self.evaluate(obs, score).0
    }

    /// Starting point for the constant-fit Newton iteration, on top of the offsets.
    fn initial_guess(&self, _obs: &[LossObservation], _offsets: &[f64]) -> f64 {
        0.0
    }
}

/// Cross-entropy with a fractional target `t` in `[0, 1]`.
pub fn loss_pi(target: f64, score: f64) -> (f64, GradHess) {
    let p = logistic(score);
    let value = softplus(score) - target * score;
    (
        value,
        GradHess {
            grad: p - target,
            hess: p * (1.0 - p),
        },
    )
}

/// Weighted Tweedie deviance `weight * D(y, exp(F))`.
pub fn loss_mu(y: f64, weight: f64, score: f64, zeta: PowerParam) -> (f64, GradHess) {
    let z = zeta.value();
    let a = ((2.0 - z) * score).exp();
    let b = ((1.0 - z) * score).exp();
    let value = weight * unit_deviance(y, score.exp(), zeta);
    (
        value,
        GradHess {
            grad: 2.0 * weight * (a - y * b),
            hess: 2.0 * weight * ((2.0 - z) * a - (1.0 - z) * y * b),
        },
    )
}

/// Gamma-regression loss for the dispersion: `weight * (d exp(-F) + F)`.
pub fn loss_phi(d: f64, weight: f64, score: f64) -> (f64, GradHess) {
    let e = (-score).exp();
    (
        weight * (d * e + score),
        GradHess {
            grad: weight * (1.0 - d * e),
            hess: weight * d * e,
        },
    )
}

/// Negative zero-truncated Tweedie log-likelihood (up to `F`-free terms)
/// with `omega = w / phi0`.
pub fn loss_init_positive(y: f64, omega: f64, score: f64, zeta: PowerParam) -> (f64, GradHess) {
    let z = zeta.value();
    let a = ((2.0 - z) * score).exp();
    let b = ((1.0 - z) * score).exp();
    // u is the expected claim count; 1 - exp(-u) is Pr(Y > 0)
    let u = omega * a / (2.0 - z);
    let positive = -(-u).exp_m1();
    let value = omega * (a / (2.0 - z) - y * b / (1.0 - z)) + positive.ln();
    let grad = omega * b * (score.exp() / positive - y);
    // d/dF [a / (1 - e^-u)] = (2 - zeta) a / (1 - e^-u) * (1 - u / (e^u - 1))
    let damp = if u > 1e-8 { 1.0 - u / u.exp_m1() } else { 0.5 * u };
    let hess = omega * (2.0 - z) * a / positive * damp + omega * y * (z - 1.0) * b;
    (
        value,
        GradHess {
            grad,
            hess: hess.max(INIT_HESS_FLOOR),
        },
    )
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PiLoss;

impl Loss for PiLoss {
    fn name(&self) -> &'static str {
        "zero-state"
    }

    fn evaluate(&self, obs: &LossObservation, score: f64) -> (f64, GradHess) {
        let (v, gh) = loss_pi(obs.target, score);
        scale(obs.weight, v, gh)
    }

    fn initial_guess(&self, obs: &[LossObservation], offsets: &[f64]) -> f64 {
        let (sw, st) = obs
            .iter()
            .fold((0.0, 0.0), |(sw, st), o| (sw + o.weight, st + o.weight * o.target));
        let mean = (st / sw).clamp(1e-6, 1.0 - 1e-6);
        crate::tweedie::logit(mean) - mean_offset(offsets)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MuLoss {
    pub zeta: PowerParam,
}

impl Loss for MuLoss {
    fn name(&self) -> &'static str {
        "mean"
    }

    fn evaluate(&self, obs: &LossObservation, score: f64) -> (f64, GradHess) {
        loss_mu(obs.target, obs.weight, score, self.zeta)
    }

    fn initial_guess(&self, obs: &[LossObservation], offsets: &[f64]) -> f64 {
        log_weighted_mean(obs) - mean_offset(offsets)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PhiLoss;

impl Loss for PhiLoss {
    fn name(&self) -> &'static str {
        "dispersion"
    }

    fn evaluate(&self, obs: &LossObservation, score: f64) -> (f64, GradHess) {
        loss_phi(obs.target, obs.weight, score)
    }

    fn initial_guess(&self, obs: &[LossObservation], offsets: &[f64]) -> f64 {
        log_weighted_mean(obs) - mean_offset(offsets)
    }
}

/// Initialization loss; `aux` carries the exposure and `omega = aux / phi0`.
#[derive(Debug, Clone, Copy)]
pub struct InitPositiveLoss {
    pub zeta: PowerParam,
    pub phi0: f64,
}

impl Loss for InitPositiveLoss {
    fn name(&self) -> &'static str {
        "positive-tweedie"
    }

    fn evaluate(&self, obs: &LossObservation, score: f64) -> (f64, GradHess) {
        let (v, gh) = loss_init_positive(obs.target, obs.aux / self.phi0, score, self.zeta);
        scale(obs.weight, v, gh)
    }

    fn initial_guess(&self, obs: &[LossObservation], offsets: &[f64]) -> f64 {
        log_weighted_mean(obs) - mean_offset(offsets)
    }
}

#[inline]
fn scale(weight: f64, value: f64, gh: GradHess) -> (f64, GradHess) {
    (
        weight * value,
        GradHess {
            grad: weight * gh.grad,
            hess: weight * gh.hess,
        },
    )
}

fn mean_offset(offsets: &[f64]) -> f64 {
    if offsets.is_empty() {
        0.0
    } else {
        offsets.iter().sum::<f64>() / offsets.len() as f64
    }
}

fn log_weighted_mean(obs: &[LossObservation]) -> f64 {
    let (sw, st) = obs
        .iter()
        .fold((0.0, 0.0), |(sw, st), o| (sw + o.weight, st + o.weight * o.target));
    if sw > 0.0 && st > 0.0 {
        (st / sw).ln()
    } else {
        0.0
    }
}
