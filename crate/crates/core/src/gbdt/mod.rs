//! Second-order gradient boosting of regression trees for any [`Loss`].

mod binning;
mod grow;
mod tree;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use binning::{quantile_cuts, BinnedDataset, CategoricalBins, NumericBins};
pub use grow::{fit_tree, leaf_values, newton_value, GrownTree};
pub use tree::{Child, DecisionTree, Ensemble, SplitNode, SplitRule};

use crate::error::{Error, Result};
use crate::losses::{GradHess, Loss, LossObservation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostConfig {
    pub num_trees: usize,
    pub learning_rate: f64,
    pub max_leaves: usize,
    pub min_leaf_count: usize,
    pub min_leaf_hessian: f64,
    pub l2_leaf_reg: f64,
    pub max_bins: usize,
    pub early_stop_rounds: Option<usize>,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self {
            num_trees: 200,
            learning_rate: 0.1,
            max_leaves: 31,
            min_leaf_count: 20,
            min_leaf_hessian: 1e-3,
            l2_leaf_reg: 1.0,
            max_bins: 255,
            early_stop_rounds: None,
            validation_fraction: 0.0,
            seed: 0,
        }
    }
}

impl BoostConfig {
    /// Intercept-only fitting: trees cannot split.
    pub fn constant_only() -> Self {
        Self {
            max_leaves: 1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::invalid(format!(
                "learning rate must lie in (0, 1], got {}",
                self.learning_rate
            )));
        }
        if self.max_leaves == 0 {
            return Err(Error::invalid("max_leaves must be at least 1"));
        }
        if self.max_bins < 2 {
            return Err(Error::invalid("max_bins must be at least 2"));
        }
        if !(self.min_leaf_hessian >= 0.0) || !(self.l2_leaf_reg >= 0.0) {
            return Err(Error::invalid("leaf hessian floor and l2 penalty must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::invalid(format!(
                "validation fraction must lie in [0, 1), got {}",
                self.validation_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    /// All `num_trees` rounds ran.
    Completed,
    /// A tree did not strictly lower the training loss and was discarded.
    NoImprovement,
    /// The new tree had no admissible split.
    NoSplit,
    /// Validation loss stopped improving.
    EarlyStopped,
}

#[derive(Debug, Clone)]
pub struct BoostOutcome {
    /// Increment on top of the offsets.
    pub ensemble: Ensemble,
    /// Training loss after the constant fit and after every kept tree.
    pub train_loss: Vec<f64>,
    pub valid_loss: Vec<f64>,
    pub stop: StopReason,
}

fn total_loss(loss: &dyn Loss, obs: &[LossObservation], scores: &[f64]) -> f64 {
    obs.iter().zip(scores).map(|(o, &s)| loss.value(o, s)).sum()
}

/// Best constant on top of `offsets`, by safeguarded Newton iteration.
pub fn init_constant(loss: &dyn Loss, obs: &[LossObservation], offsets: &[f64]) -> Result<f64> {
    if obs.len() != offsets.len() {
        return Err(Error::LengthMismatch {
            expected: obs.len(),
            found: offsets.len(),
        });
    }
    let weight_sum: f64 = obs.iter().map(|o| o.weight).sum();
    if obs.is_empty() || !(weight_sum > 0.0) {
        return Err(Error::DegenerateWeighting);
    }
    let tol = 1e-12 * weight_sum.max(1.0);
    let objective = |gamma: f64| -> f64 {
        obs.iter()
            .zip(offsets)
            .map(|(o, &f)| loss.value(o, f + gamma))
            .sum()
    };

    let mut gamma = loss.initial_guess(obs, offsets);
    if !gamma.is_finite() {
        gamma = 0.0;
    }
    let mut current = objective(gamma);
    for _ in 0..50 {
        let (g, h) = obs.iter().zip(offsets).fold((0.0, 0.0), |(g, h), (o, &f)| {
            let (_, gh) = loss.evaluate(o, f + gamma);
            (g + gh.grad, h + gh.hess)
        });
        if g.abs() <= tol {
            break;
        }
        let mut step = if h > 0.0 { -g / h } else { -g.signum() };
        let mut accepted = false;
        for _ in 0..60 {
            let candidate = objective(gamma + step);
            if candidate <= current {
                gamma += step;
                current = candidate;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted || step.abs() <= 1e-15 * (1.0 + gamma.abs()) {
            break;
        }
    }
    Ok(gamma)
}

fn grad_hess(loss: &dyn Loss, obs: &[LossObservation], scores: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let gh: Vec<GradHess> = obs
        .par_iter()
        .zip(scores.par_iter())
        .map(|(o, &s)| loss.evaluate(o, s).1)
        .collect();
    gh.into_iter().map(|x| (x.grad, x.hess)).unzip()
}

/// Boost `config.num_trees` trees on top of per-row `offsets`.
///
/// `rows` selects dataset rows; `obs` and `offsets` are aligned with `rows`.
/// A tree that fails to strictly decrease the training loss is dropped and
/// boosting stops, so `train_loss` is strictly decreasing after its first entry.
pub fn fit_ensemble(
    loss: &dyn Loss,
    data: &BinnedDataset,
    rows: &[usize],
    obs: &[LossObservation],
    offsets: &[f64],
    config: &BoostConfig,
) -> Result<BoostOutcome> {
    config.validate()?;
    if obs.len() != rows.len() {
        return Err(Error::LengthMismatch {
            expected: rows.len(),
            found: obs.len(),
        });
    }
    if offsets.len() != rows.len() {
        return Err(Error::LengthMismatch {
            expected: rows.len(),
            found: offsets.len(),
        });
    }
    if let Some(&bad) = rows.iter().find(|&&r| r >= data.n_rows()) {
        return Err(Error::invalid(format!("row index {bad} out of range")));
    }

    let (train, valid) = split_validation(rows.len(), config);
    let pick = |idx: &[usize]| -> (Vec<usize>, Vec<LossObservation>, Vec<f64>) {
        (
            idx.iter().map(|&k| rows[k]).collect(),
            idx.iter().map(|&k| obs[k]).collect(),
            idx.iter().map(|&k| offsets[k]).collect(),
        )
    };
    let (train_rows, train_obs, train_off) = pick(&train);
    let (valid_rows, valid_obs, valid_off) = pick(&valid);

    let base = init_constant(loss, &train_obs, &train_off)?;
    let layout = data.raw.layout();
    let mut ensemble = Ensemble::constant(base, layout);

    let mut scores: Vec<f64> = train_off.iter().map(|f| f + base).collect();
    let mut valid_scores: Vec<f64> = valid_off.iter().map(|f| f + base).collect();
    let mut train_loss = vec![total_loss(loss, &train_obs, &scores)];
    let mut valid_loss = Vec::new();
    if !valid.is_empty() {
        valid_loss.push(total_loss(loss, &valid_obs, &valid_scores));
    }
    let mut best_round = 0usize;
    let mut stop = StopReason::Completed;

    for _ in 0..config.num_trees {
        let (grads, hesses) = grad_hess(loss, &train_obs, &scores);
        let grown = fit_tree(data, &train_rows, &grads, &hesses, config);
        if grown.tree.is_root_only() {
            stop = StopReason::NoSplit;
            break;
        }
        let mut tree = grown.tree;
        for v in &mut tree.leaves {
            *v *= config.learning_rate;
        }
        let next: Vec<f64> = scores
            .iter()
            .zip(&grown.leaf_of_row)
            .map(|(s, &leaf)| s + tree.leaves[leaf])
            .collect();
        let next_loss = total_loss(loss, &train_obs, &next);
        let prev_loss = *train_loss.last().expect("trace starts with the constant fit");
        if !(next_loss < prev_loss) {
            stop = StopReason::NoImprovement;
            break;
        }

        if !valid.is_empty() {
            for (s, &r) in valid_scores.iter_mut().zip(&valid_rows) {
                *s += tree.predict(&data.raw.row(r));
            }
            let vl = total_loss(loss, &valid_obs, &valid_scores);
            valid_loss.push(vl);
            if vl < valid_loss[best_round] {
                best_round = valid_loss.len() - 1;
            }
        }
        scores = next;
        train_loss.push(next_loss);
        ensemble.trees.push(tree);

        if let Some(patience) = config.early_stop_rounds {
            if !valid.is_empty() && valid_loss.len() - 1 - best_round >= patience {
                stop = StopReason::EarlyStopped;
                break;
            }
        }
    }

    if stop == StopReason::EarlyStopped {
        ensemble.trees.truncate(best_round);
        train_loss.truncate(best_round + 1);
        valid_loss.truncate(best_round + 1);
    }

    Ok(BoostOutcome {
        ensemble,
        train_loss,
        valid_loss,
        stop,
    })
}

fn split_validation(n: usize, config: &BoostConfig) -> (Vec<usize>, Vec<usize>) {
    let n_valid = (config.validation_fraction * n as f64).round() as usize;
    if config.validation_fraction <= 0.0 || n_valid == 0 || n_valid >= n {
        return ((0..n).collect(), Vec::new());
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    order.shuffle(&mut rng);
    let mut valid: Vec<usize> = order[..n_valid].to_vec();
    let mut train: Vec<usize> = order[n_valid..].to_vec();
    valid.sort_unstable();
    train.sort_unstable();
    (train, valid)
}
