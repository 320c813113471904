//! Generalized EM training of the zero-inflated Tweedie model.
//!
//! Each iteration computes zero-state responsibilities, then warm-starts three
//! boosted updates: the zero-state logit, the log mean (with the lagged
//! dispersion in its weights) and the log dispersion (from deviances at the
//! fresh mean). The dispersion update comes from a quasi-likelihood surrogate,
//! so its increment is shrunk until the exact log-likelihood does not drop.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureSchema, FeatureVector};
use crate::error::{Error, Result};
use crate::gbdt::{fit_ensemble, BinnedDataset, BoostConfig, Ensemble};
use crate::losses::{InitPositiveLoss, LossObservation, MuLoss, PhiLoss, PiLoss};
use crate::tweedie::{logistic, logit, unit_deviance, zero_rate, zit_log_likelihood, LinkScores, PowerParam};

/// Zero-state probabilities are kept inside `[PI_CLAMP, 1 - PI_CLAMP]`.
pub const PI_CLAMP: f64 = 1e-6;

/// Candidate scales for the dispersion increment, largest first.
const PHI_STEP_SCALES: [f64; 5] = [1.0, 0.5, 0.25, 0.125, 0.0625];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub max_em_iterations: usize,
    pub loglik_rel_tolerance: f64,
    pub boost_pi: BoostConfig,
    pub boost_mu: BoostConfig,
    pub boost_phi: BoostConfig,
    pub trees_per_m_step: usize,
    pub min_responsibility_weight: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_em_iterations: 50,
            loglik_rel_tolerance: 1e-6,
            boost_pi: BoostConfig::default(),
            boost_mu: BoostConfig::default(),
            boost_phi: BoostConfig::default(),
            trees_per_m_step: 25,
            min_responsibility_weight: 1e-10,
        }
    }
}

impl EmConfig {
    /// Every sub-model restricted to a constant.
    pub fn constant_only() -> Self {
        Self {
            boost_pi: BoostConfig::constant_only(),
            boost_mu: BoostConfig::constant_only(),
            boost_phi: BoostConfig::constant_only(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.loglik_rel_tolerance > 0.0) {
            return Err(Error::invalid("log-likelihood tolerance must be positive"));
        }
        if !(self.min_responsibility_weight >= 0.0) {
            return Err(Error::invalid("minimum responsibility weight must be non-negative"));
        }
        self.boost_pi.validate()?;
        self.boost_mu.validate()?;
        self.boost_phi.validate()
    }
}

/// Boosting trace of one sub-fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubFitTrace {
    /// EM iteration, or 0 for the initial positive fit.
    pub iteration: usize,
    pub which: String,
    pub train_loss: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub em_iterations_run: usize,
    pub converged: bool,
    pub final_loglik: f64,
    /// Observed-data log-likelihood at initialization and after every iteration.
    pub loglik_trace: Vec<f64>,
    /// Quasi-likelihood Q-function after every iteration.
    pub q_trace: Vec<f64>,
    /// Scale applied to each dispersion increment.
    pub phi_step_scales: Vec<f64>,
    pub sub_fits: Vec<SubFitTrace>,
    pub warnings: Vec<String>,
    pub config: EmConfig,
}

/// Fitted model: `mu = exp(f_mu)`, `phi = exp(f_phi)`, `pi = logistic(f_pi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZitModel {
    pub zeta: PowerParam,
    pub f_mu: Ensemble,
    pub f_phi: Ensemble,
    pub f_pi: Ensemble,
    pub schema: FeatureSchema,
    pub training_meta: TrainingMeta,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZitPrediction {
    pub mu: f64,
    pub phi: f64,
    pub pi: f64,
}

impl ZitPrediction {
    /// Expected response per unit exposure, `(1 - pi) mu`.
    pub fn pure_premium(&self) -> f64 {
        (1.0 - self.pi) * self.mu
    }
}

impl ZitModel {
    pub fn scores(&self, x: &FeatureVector) -> Result<LinkScores> {
        Ok(LinkScores {
            f_mu: self.f_mu.predict(x)?,
            f_phi: self.f_phi.predict(x)?,
            f_pi: self.f_pi.predict(x)?,
        })
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<ZitPrediction> {
        let s = self.scores(x)?;
        Ok(ZitPrediction {
            mu: s.mu(),
            phi: s.phi(),
            pi: s.pi(),
        })
    }

    pub fn score_matrix(&self, m: &crate::data::FeatureMatrix) -> Result<Vec<LinkScores>> {
        let f_mu = self.f_mu.predict_matrix(m)?;
        let f_phi = self.f_phi.predict_matrix(m)?;
        let f_pi = self.f_pi.predict_matrix(m)?;
        Ok(f_mu
            .into_iter()
            .zip(f_phi)
            .zip(f_pi)
            .map(|((f_mu, f_phi), f_pi)| LinkScores { f_mu, f_phi, f_pi })
            .collect())
    }

    pub fn predict_dataset(&self, data: &Dataset) -> Result<Vec<ZitPrediction>> {
        Ok(self
            .score_matrix(&data.features)?
            .into_iter()
            .map(|s| ZitPrediction {
                mu: s.mu(),
                phi: s.phi(),
                pi: s.pi(),
            })
            .collect())
    }

    /// Exact observed-data log-likelihood on `data`.
    pub fn log_likelihood(&self, data: &Dataset) -> Result<f64> {
        let scores = self.score_matrix(&data.features)?;
        zit_log_likelihood(&data.target, &data.exposure, &scores, self.zeta)
    }
}

#[derive(Debug, Clone)]
pub struct Initialization {
    pub model: ZitModel,
    pub mu0: f64,
    pub phi0: f64,
    pub phi0_hat: f64,
    /// Excess-zero ratio before clamping.
    pub pi0_hat: f64,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorState {
    pub responsibilities: Vec<f64>,
}

/// New trees for each sub-model from one M-step, relative to the previous model.
#[derive(Debug, Clone)]
pub struct ModelIncrement {
    pub pi: Ensemble,
    pub mu: Ensemble,
    pub phi: Ensemble,
    pub sub_fits: Vec<SubFitTrace>,
}

impl ModelIncrement {
    /// Previous model plus the increments, with the dispersion increment scaled.
    pub fn apply(&self, prev: &ZitModel, phi_scale: f64) -> ZitModel {
        let mut next = prev.clone();
        next.f_pi = prev.f_pi.extended(&self.pi);
        next.f_mu = prev.f_mu.extended(&self.mu);
        next.f_phi = if phi_scale == 1.0 {
            prev.f_phi.extended(&self.phi)
        } else {
            prev.f_phi.extended(&self.phi.scaled(phi_scale))
        };
        next
    }
}

/// Binned copies of the features, one per distinct bin budget.
struct BinCache {
    bins: Vec<(usize, BinnedDataset)>,
}

impl BinCache {
    fn new(data: &Dataset, configs: &[&BoostConfig]) -> Self {
        let mut bins: Vec<(usize, BinnedDataset)> = Vec::new();
        for c in configs {
            if !bins.iter().any(|(m, _)| *m == c.max_bins) {
                bins.push((c.max_bins, BinnedDataset::new(&data.features, c.max_bins)));
            }
        }
        Self { bins }
    }

    fn get(&self, max_bins: usize) -> &BinnedDataset {
        &self
            .bins
            .iter()
            .find(|(m, _)| *m == max_bins)
            .expect("bin budget registered at construction")
            .1
    }
}

fn sub_fit_error(which: &'static str) -> impl FnOnce(Error) -> Error {
    move |e| Error::SubFit {
        which,
        source: Box::new(e),
    }
}

/// Starting values: a zero-truncated Tweedie fit for the mean and constant
/// dispersion and zero-state probability.
pub fn initialize(data: &Dataset, zeta: PowerParam, config: &EmConfig) -> Result<Initialization> {
    config.validate()?;
    let cache = BinCache::new(data, &[&config.boost_mu]);
    initialize_with(data, zeta, config, &cache)
}

fn initialize_with(data: &Dataset, zeta: PowerParam, config: &EmConfig, cache: &BinCache) -> Result<Initialization> {
    let positive: Vec<usize> = (0..data.len()).filter(|&i| data.target[i] > 0.0).collect();
    if positive.is_empty() {
        return Err(Error::NoPositiveResponses);
    }
    let n_pos = positive.len() as f64;
    let (swy, sw) = positive
        .iter()
        .fold((0.0, 0.0), |(a, b), &i| (a + data.exposure[i] * data.target[i], b + data.exposure[i]));
    let mu0 = swy / sw;
    let phi0 = positive
        .iter()
        .map(|&i| data.exposure[i] * unit_deviance(data.target[i], mu0, zeta))
        .sum::<f64>()
        / n_pos;
    if !(phi0 > 0.0) {
        return Err(Error::Degenerate(
            "all positive responses are identical, so the dispersion is zero".into(),
        ));
    }

    let obs: Vec<LossObservation> = positive
        .iter()
        .map(|&i| LossObservation::with_aux(data.target[i], 1.0, data.exposure[i]))
        .collect();
    let loss = InitPositiveLoss { zeta, phi0 };
    let out = fit_ensemble(
        &loss,
        cache.get(config.boost_mu.max_bins),
        &positive,
        &obs,
        &vec![0.0; positive.len()],
        &config.boost_mu,
    )
    .map_err(sub_fit_error("initial mean"))?;
    let f_mu = out.ensemble;
    let f_mu_scores = f_mu.predict_matrix(&data.features)?;

    let phi0_hat = positive
        .iter()
        .map(|&i| data.exposure[i] * unit_deviance(data.target[i], f_mu_scores[i].exp(), zeta))
        .sum::<f64>()
        / n_pos;
    if !(phi0_hat > 0.0) {
        return Err(Error::Degenerate("initial mean fit interpolates every positive response".into()));
    }

    let expected_zeros: f64 = (0..data.len())
        .map(|i| (-zero_rate(f_mu_scores[i].exp(), phi0_hat / data.exposure[i], zeta)).exp())
        .sum();
    let observed_zeros = (data.len() - positive.len()) as f64;
    let pi0_hat = (observed_zeros - expected_zeros) / (data.len() as f64 - expected_zeros);
    let mut warning = None;
    let pi0 = if pi0_hat <= PI_CLAMP || !pi0_hat.is_finite() {
        warning = Some(format!(
            "zero fraction below Tweedie prediction (excess-zero ratio {pi0_hat:.3e}); zero-state probability clamped to {PI_CLAMP:e}"
        ));
        PI_CLAMP
    } else {
        pi0_hat.min(1.0 - PI_CLAMP)
    };

    let layout = data.features.layout();
    let mut model = ZitModel {
        zeta,
        f_mu,
        f_phi: Ensemble::constant(phi0_hat.ln(), layout),
        f_pi: Ensemble::constant(logit(pi0), layout),
        schema: data.schema.clone(),
        training_meta: TrainingMeta {
            em_iterations_run: 0,
            converged: false,
            final_loglik: 0.0,
            loglik_trace: Vec::new(),
            q_trace: Vec::new(),
            phi_step_scales: Vec::new(),
            sub_fits: vec![SubFitTrace {
                iteration: 0,
                which: "initial mean".into(),
                train_loss: out.train_loss,
            }],
            warnings: warning.iter().cloned().collect(),
            config: config.clone(),
        },
    };
    model.training_meta.final_loglik = model.log_likelihood(data)?;
    Ok(Initialization {
        model,
        mu0,
        phi0,
        phi0_hat,
        pi0_hat,
        warning,
    })
}

/// Posterior probability of the perfect-zero state for one row.
#[inline]
pub fn responsibility(y: f64, w: f64, scores: &LinkScores, zeta: PowerParam) -> f64 {
    if y > 0.0 {
        return 0.0;
    }
    let pi = scores.pi().clamp(PI_CLAMP, 1.0 - PI_CLAMP);
    // pi / (pi + (1 - pi) exp(-rate)) = logistic(logit(pi) + rate)
    logistic(logit(pi) + zero_rate(scores.mu(), scores.phi() / w, zeta))
}

fn responsibilities(y: &[f64], w: &[f64], scores: &[LinkScores], zeta: PowerParam) -> Vec<f64> {
    (0..y.len())
        .into_par_iter()
        .map(|i| responsibility(y[i], w[i], &scores[i], zeta))
        .collect()
}

pub fn e_step(data: &Dataset, model: &ZitModel) -> Result<PosteriorState> {
    let scores = model.score_matrix(&data.features)?;
    Ok(PosteriorState {
        responsibilities: responsibilities(&data.target, &data.exposure, &scores, model.zeta),
    })
}

/// Expected complete-data log-likelihood with the quasi-likelihood normalizer.
pub fn q_function(y: &[f64], w: &[f64], scores: &[LinkScores], posterior: &[f64], zeta: PowerParam) -> f64 {
    let terms: Vec<f64> = (0..y.len())
        .into_par_iter()
        .map(|i| {
            let s = &scores[i];
            let r = posterior[i];
            let tweedie = if y[i] > 0.0 {
                let phi = s.phi() / w[i];
                -0.5 * unit_deviance(y[i], s.mu(), zeta) / phi
                    - 0.5 * (2.0 * std::f64::consts::PI * phi * y[i].powf(zeta.value())).ln()
            } else {
                -zero_rate(s.mu(), s.phi() / w[i], zeta)
            };
            let log_pi = -crate::tweedie::softplus(-s.f_pi);
            let log_not_pi = -crate::tweedie::softplus(s.f_pi);
            let zero_part = if r > 0.0 { r * log_pi } else { 0.0 };
            (1.0 - r) * (tweedie + log_not_pi) + zero_part
        })
        .collect();
    terms.iter().sum()
}

struct Scored {
    pi: Vec<f64>,
    mu: Vec<f64>,
    phi: Vec<f64>,
}

impl Scored {
    fn from_model(data: &Dataset, model: &ZitModel) -> Result<Self> {
        Ok(Self {
            pi: model.f_pi.predict_matrix(&data.features)?,
            mu: model.f_mu.predict_matrix(&data.features)?,
            phi: model.f_phi.predict_matrix(&data.features)?,
        })
    }

    fn links(&self) -> Vec<LinkScores> {
        (0..self.mu.len())
            .map(|i| LinkScores {
                f_mu: self.mu[i],
                f_phi: self.phi[i],
                f_pi: self.pi[i],
            })
            .collect()
    }
}

fn add(base: &[f64], inc: &[f64], scale: f64) -> Vec<f64> {
    base.iter().zip(inc).map(|(b, d)| b + scale * d).collect()
}

struct Increments {
    model: ModelIncrement,
    pi: Vec<f64>,
    mu: Vec<f64>,
    phi: Vec<f64>,
}

fn fit_rows(
    which: &'static str,
    loss: &dyn crate::losses::Loss,
    cache: &BinCache,
    config: &BoostConfig,
    obs: &[LossObservation],
    offsets: &[f64],
    min_weight: f64,
    trees: usize,
) -> Result<(Ensemble, Vec<f64>)> {
    let rows: Vec<usize> = (0..obs.len()).filter(|&i| obs[i].weight >= min_weight && obs[i].weight > 0.0).collect();
    if rows.is_empty() {
        return Err(sub_fit_error(which)(Error::DegenerateWeighting));
    }
    let kept_obs: Vec<LossObservation> = rows.iter().map(|&i| obs[i]).collect();
    let kept_off: Vec<f64> = rows.iter().map(|&i| offsets[i]).collect();
    let cfg = BoostConfig {
        num_trees: trees,
        ..config.clone()
    };
    let out = fit_ensemble(loss, cache.get(config.max_bins), &rows, &kept_obs, &kept_off, &cfg)
        .map_err(sub_fit_error(which))?;
    Ok((out.ensemble, out.train_loss))
}

fn m_step_scored(
    data: &Dataset,
    cache: &BinCache,
    posterior: &[f64],
    scored: &Scored,
    zeta: PowerParam,
    config: &EmConfig,
    iteration: usize,
) -> Result<Increments> {
    let n = data.len();
    let trees = config.trees_per_m_step;
    let min_w = config.min_responsibility_weight;
    let mut traces = Vec::with_capacity(3);

    let obs: Vec<LossObservation> = posterior.iter().map(|&r| LossObservation::new(r, 1.0)).collect();
    let (pi_inc, loss) = fit_rows("zero-state", &PiLoss, cache, &config.boost_pi, &obs, &scored.pi, min_w, trees)?;
    traces.push(SubFitTrace { iteration, which: "zero-state".into(), train_loss: loss });

    let obs: Vec<LossObservation> = (0..n)
        .map(|i| {
            let weight = (1.0 - posterior[i]) * data.exposure[i] / scored.phi[i].exp();
            LossObservation::new(data.target[i], weight)
        })
        .collect();
    let (mu_inc, loss) = fit_rows("mean", &MuLoss { zeta }, cache, &config.boost_mu, &obs, &scored.mu, min_w, trees)?;
    traces.push(SubFitTrace { iteration, which: "mean".into(), train_loss: loss });
    let mu_delta = mu_inc.predict_matrix(&data.features)?;
    let mu_next = add(&scored.mu, &mu_delta, 1.0);

    let obs: Vec<LossObservation> = (0..n)
        .map(|i| {
            let d = data.exposure[i] * unit_deviance(data.target[i], mu_next[i].exp(), zeta);
            LossObservation::new(d, 1.0 - posterior[i])
        })
        .collect();
    let (phi_inc, loss) = fit_rows("dispersion", &PhiLoss, cache, &config.boost_phi, &obs, &scored.phi, min_w, trees)?;
    traces.push(SubFitTrace { iteration, which: "dispersion".into(), train_loss: loss });

    Ok(Increments {
        pi: pi_inc.predict_matrix(&data.features)?,
        mu: mu_delta,
        phi: phi_inc.predict_matrix(&data.features)?,
        model: ModelIncrement {
            pi: pi_inc,
            mu: mu_inc,
            phi: phi_inc,
            sub_fits: traces,
        },
    })
}

/// One M-step: boosted increments for all three sub-models.
pub fn m_step(data: &Dataset, posterior: &PosteriorState, model_prev: &ZitModel, config: &EmConfig) -> Result<ModelIncrement> {
    config.validate()?;
    if posterior.responsibilities.len() != data.len() {
        return Err(Error::LengthMismatch {
            expected: data.len(),
            found: posterior.responsibilities.len(),
        });
    }
    let cache = BinCache::new(data, &[&config.boost_pi, &config.boost_mu, &config.boost_phi]);
    let scored = Scored::from_model(data, model_prev)?;
    let iteration = model_prev.training_meta.em_iterations_run + 1;
    Ok(m_step_scored(data, &cache, &posterior.responsibilities, &scored, model_prev.zeta, config, iteration)?.model)
}

fn loglik_of(data: &Dataset, pi: &[f64], mu: &[f64], phi: &[f64], zeta: PowerParam) -> Result<f64> {
    let scores: Vec<LinkScores> = (0..data.len())
        .map(|i| LinkScores {
            f_mu: mu[i],
            f_phi: phi[i],
            f_pi: pi[i],
        })
        .collect();
    zit_log_likelihood(&data.target, &data.exposure, &scores, zeta)
}

/// Full training run at a fixed power parameter.
pub fn fit(data: &Dataset, zeta: PowerParam, config: &EmConfig) -> Result<ZitModel> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("cannot fit an empty dataset"));
    }
    let cache = BinCache::new(data, &[&config.boost_pi, &config.boost_mu, &config.boost_phi]);
    let mut model = initialize_with(data, zeta, config, &cache)?.model;
    let mut scored = Scored::from_model(data, &model)?;
    let mut loglik = loglik_of(data, &scored.pi, &scored.mu, &scored.phi, zeta)?;
    let n = data.len() as f64;

    let mut meta = model.training_meta.clone();
    meta.loglik_trace.push(loglik);

    for k in 1..=config.max_em_iterations {
        let posterior = responsibilities(&data.target, &data.exposure, &scored.links(), zeta);
        let inc = m_step_scored(data, &cache, &posterior, &scored, zeta, config, k)?;
        let pi_next = add(&scored.pi, &inc.pi, 1.0);
        let mu_next = add(&scored.mu, &inc.mu, 1.0);

        let base = loglik_of(data, &pi_next, &mu_next, &scored.phi, zeta)?;
        if base < loglik {
            // Numerical slack only: the zero-state and mean updates cannot lower
            // the exact likelihood. Keep the previous model and stop.
            meta.converged = true;
            break;
        }
        let mut best = (0.0, base);
        for t in PHI_STEP_SCALES {
            let l = loglik_of(data, &pi_next, &mu_next, &add(&scored.phi, &inc.phi, t), zeta)?;
            if l >= base && l > best.1 {
                best = (t, l);
            }
        }
        let (t, next_loglik) = best;
        if next_loglik < loglik - 1e-8 * n {
            return Err(Error::LikelihoodDecrease {
                iteration: k,
                drop: loglik - next_loglik,
            });
        }

        model = inc.model.apply(&model, t);
        scored = Scored {
            pi: pi_next,
            mu: mu_next,
            phi: add(&scored.phi, &inc.phi, t),
        };
        meta.q_trace
            .push(q_function(&data.target, &data.exposure, &scored.links(), &posterior, zeta));
        meta.phi_step_scales.push(t);
        meta.sub_fits.extend(inc.model.sub_fits);
        meta.loglik_trace.push(next_loglik);
        meta.em_iterations_run = k;

        let change = (next_loglik - loglik).abs() / loglik.abs().max(f64::MIN_POSITIVE);
        loglik = next_loglik;
        if change < config.loglik_rel_tolerance {
            meta.converged = true;
            break;
        }
    }

    meta.final_loglik = model.log_likelihood(data)?;
    model.training_meta = meta;
    Ok(model)
}
