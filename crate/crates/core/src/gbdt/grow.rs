//! Leaf-wise tree growth on gradient/Hessian histograms.

use rayon::prelude::*;

use super::binning::BinnedDataset;
use super::tree::{Child, DecisionTree, SplitNode, SplitRule};
use super::BoostConfig;

/// Splits must beat the parent score by this relative margin.
const GAIN_REL_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Default)]
struct Bin {
    g: f64,
    h: f64,
    n: usize,
}

impl Bin {
    #[inline]
    fn add(&mut self, o: &Bin) {
        self.g += o.g;
        self.h += o.h;
        self.n += o.n;
    }

    #[inline]
    fn minus(&self, o: &Bin) -> Bin {
        Bin {
            g: self.g - o.g,
            h: self.h - o.h,
            n: self.n - o.n,
        }
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    gain: f64,
    rule: SplitRule,
    missing_left: bool,
}

/// Result of growing one tree on a subset of rows.
#[derive(Debug, Clone)]
pub struct GrownTree {
    /// Tree with unshrunk Newton leaf values.
    pub tree: DecisionTree,
    /// Leaf reached by each training row, aligned with the `rows` argument.
    pub leaf_of_row: Vec<usize>,
}

struct Leaf {
    rows: Vec<usize>,
    total: Bin,
    best: Option<Candidate>,
    parent: Option<(usize, bool)>,
}

#[inline]
fn score(g: f64, h: f64, lambda: f64) -> f64 {
    let d = h + lambda;
    if d > 0.0 {
        g * g / d
    } else {
        0.0
    }
}

/// Newton step `-G / (H + lambda)` for one region.
#[inline]
pub fn newton_value(g: f64, h: f64, lambda: f64) -> f64 {
    let d = h + lambda;
    if d > 0.0 {
        -g / d
    } else {
        0.0
    }
}

/// Per-leaf Newton values from region membership.
pub fn leaf_values(leaf_of_row: &[usize], n_leaves: usize, grads: &[f64], hesses: &[f64], l2_leaf_reg: f64) -> Vec<f64> {
    let mut g = vec![0.0; n_leaves];
    let mut h = vec![0.0; n_leaves];
    for (k, &leaf) in leaf_of_row.iter().enumerate() {
        g[leaf] += grads[k];
        h[leaf] += hesses[k];
    }
    g.iter()
        .zip(&h)
        .map(|(&g, &h)| newton_value(g, h, l2_leaf_reg))
        .collect()
}

/// Greedy best-first growth: repeatedly split the leaf with the largest
/// second-order gain until `max_leaves` is reached or no split helps.
///
/// `rows` are dataset row indices; `grads`/`hesses` are aligned with `rows`.
pub fn fit_tree(data: &BinnedDataset, rows: &[usize], grads: &[f64], hesses: &[f64], config: &BoostConfig) -> GrownTree {
    let lambda = config.l2_leaf_reg;
    let positions: Vec<usize> = (0..rows.len()).collect();
    let total = sum_bins(&positions, grads, hesses);

    let mut leaves = vec![Leaf {
        rows: positions,
        total,
        best: None,
        parent: None,
    }];
    let mut nodes: Vec<SplitNode> = Vec::new();
    if config.max_leaves > 1 {
        leaves[0].best = best_split(data, rows, &leaves[0].rows, leaves[0].total, grads, hesses, config);
    }

    while leaves.len() < config.max_leaves {
        let mut pick: Option<(usize, f64)> = None;
        for (i, leaf) in leaves.iter().enumerate() {
            if let Some(c) = &leaf.best {
                if pick.is_none_or(|(_, g)| c.gain > g) {
                    pick = Some((i, c.gain));
                }
            }
        }
        let Some((leaf_id, _)) = pick else { break };

        let cand = leaves[leaf_id].best.take().expect("picked leaf has a split");
        let parent_rows = std::mem::take(&mut leaves[leaf_id].rows);
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = parent_rows
            .into_iter()
            .partition(|&k| goes_left(data, rows[k], &cand));

        let node_id = nodes.len();
        let right_id = leaves.len();
        nodes.push(SplitNode {
            rule: cand.rule.clone(),
            missing_goes_left: cand.missing_left,
            left: Child::Leaf(leaf_id),
            right: Child::Leaf(right_id),
        });
        if let Some((p, is_left)) = leaves[leaf_id].parent {
            if is_left {
                nodes[p].left = Child::Node(node_id);
            } else {
                nodes[p].right = Child::Node(node_id);
            }
        }

        let left_total = sum_bins(&left_rows, grads, hesses);
        let right_total = sum_bins(&right_rows, grads, hesses);
        let room = leaves.len() + 1 < config.max_leaves;
        let left_best = if room {
            best_split(data, rows, &left_rows, left_total, grads, hesses, config)
        } else {
            None
        };
        let right_best = if room {
            best_split(data, rows, &right_rows, right_total, grads, hesses, config)
        } else {
            None
        };
        leaves[leaf_id] = Leaf {
            rows: left_rows,
            total: left_total,
            best: left_best,
            parent: Some((node_id, true)),
        };
        leaves.push(Leaf {
            rows: right_rows,
            total: right_total,
            best: right_best,
            parent: Some((node_id, false)),
        });
    }

    let mut leaf_of_row = vec![0usize; rows.len()];
    for (id, leaf) in leaves.iter().enumerate() {
        for &k in &leaf.rows {
            leaf_of_row[k] = id;
        }
    }
    let values = leaves
        .iter()
        .map(|l| newton_value(l.total.g, l.total.h, lambda))
        .collect();
    GrownTree {
        tree: DecisionTree { nodes, leaves: values },
        leaf_of_row,
    }
}

fn sum_bins(positions: &[usize], grads: &[f64], hesses: &[f64]) -> Bin {
    let mut b = Bin::default();
    for &k in positions {
        b.g += grads[k];
        b.h += hesses[k];
        b.n += 1;
    }
    b
}

fn goes_left(data: &BinnedDataset, row: usize, cand: &Candidate) -> bool {
    match &cand.rule {
        SplitRule::Numeric { feature, threshold } => {
            let v = data.raw.numeric[*feature][row];
            if v.is_nan() {
                cand.missing_left
            } else {
                v <= *threshold
            }
        }
        SplitRule::Categorical { feature, left, right } => {
            let c = data.categorical[*feature].bins[row];
            if left.binary_search(&c).is_ok() {
                true
            } else if right.binary_search(&c).is_ok() {
                false
            } else {
                cand.missing_left
            }
        }
    }
}

fn best_split(
    data: &BinnedDataset,
    rows: &[usize],
    positions: &[usize],
    total: Bin,
    grads: &[f64],
    hesses: &[f64],
    config: &BoostConfig,
) -> Option<Candidate> {
    if positions.len() < 2 * config.min_leaf_count.max(1) {
        return None;
    }
    let n_num = data.numeric.len();
    let found: Vec<Option<Candidate>> = (0..data.n_features())
        .into_par_iter()
        .map(|f| {
            if f < n_num {
                numeric_split(data, f, rows, positions, total, grads, hesses, config)
            } else {
                categorical_split(data, f - n_num, rows, positions, total, grads, hesses, config)
            }
        })
        .collect();
    // strict comparison keeps the lowest feature index on ties
    let mut best: Option<Candidate> = None;
    for c in found.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| c.gain > b.gain) {
            best = Some(c);
        }
    }
    best
}

#[inline]
fn admissible(side: &Bin, config: &BoostConfig) -> bool {
    side.n >= config.min_leaf_count.max(1) && side.h >= config.min_leaf_hessian
}

struct GainEval {
    parent: f64,
    threshold: f64,
    lambda: f64,
}

impl GainEval {
    fn new(total: Bin, lambda: f64) -> Self {
        let parent = score(total.g, total.h, lambda);
        Self {
            parent,
            threshold: GAIN_REL_EPS * parent.abs().max(f64::MIN_POSITIVE),
            lambda,
        }
    }

    #[inline]
    fn gain(&self, left: &Bin, right: &Bin) -> f64 {
        0.5 * (score(left.g, left.h, self.lambda) + score(right.g, right.h, self.lambda) - self.parent)
    }
}

#[allow(clippy::too_many_arguments)]
fn numeric_split(
    data: &BinnedDataset,
    feature: usize,
    rows: &[usize],
    positions: &[usize],
    total: Bin,
    grads: &[f64],
    hesses: &[f64],
    config: &BoostConfig,
) -> Option<Candidate> {
    let col = &data.numeric[feature];
    let n_regular = col.n_regular();
    if n_regular < 2 {
        return None;
    }
    let mut hist = vec![Bin::default(); n_regular + 1];
    for &k in positions {
        let b = &mut hist[col.bins[rows[k]] as usize];
        b.g += grads[k];
        b.h += hesses[k];
        b.n += 1;
    }
    let missing = hist[col.missing_bin()];
    let eval = GainEval::new(total, config.l2_leaf_reg);

    let mut best: Option<(f64, usize, bool)> = None;
    let directions: &[bool] = if missing.n > 0 { &[true, false] } else { &[true] };
    for &missing_left in directions {
        let mut left = if missing_left { missing } else { Bin::default() };
        for b in 0..n_regular - 1 {
            left.add(&hist[b]);
            if hist[b].n == 0 {
                continue;
            }
            let right = total.minus(&left);
            if !admissible(&left, config) || !admissible(&right, config) {
                continue;
            }
            let gain = eval.gain(&left, &right);
            if gain > eval.threshold && best.is_none_or(|(g, _, _)| gain > g) {
                best = Some((gain, b, missing_left));
            }
        }
    }
    best.map(|(gain, b, missing_left)| Candidate {
        gain,
        rule: SplitRule::Numeric {
            feature,
            threshold: col.cuts[b],
        },
        missing_left,
    })
}

#[allow(clippy::too_many_arguments)]
fn categorical_split(
    data: &BinnedDataset,
    feature: usize,
    rows: &[usize],
    positions: &[usize],
    total: Bin,
    grads: &[f64],
    hesses: &[f64],
    config: &BoostConfig,
) -> Option<Candidate> {
    let col = &data.categorical[feature];
    let mut hist = vec![Bin::default(); col.n_categories + 1];
    for &k in positions {
        let b = &mut hist[col.bins[rows[k]] as usize];
        b.g += grads[k];
        b.h += hesses[k];
        b.n += 1;
    }
    let missing = hist[col.missing_bin()];
    let lambda = config.l2_leaf_reg;
    let mut present: Vec<(u32, f64)> = hist[..col.n_categories]
        .iter()
        .enumerate()
        .filter(|(_, b)| b.n > 0)
        .map(|(c, b)| {
            let d = b.h + lambda;
            (c as u32, if d > 0.0 { b.g / d } else { 0.0 })
        })
        .collect();
    if present.len() < 2 {
        return None;
    }
    present.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    let eval = GainEval::new(total, lambda);

    let mut best: Option<(f64, usize, bool)> = None;
    let directions: &[bool] = if missing.n > 0 { &[true, false] } else { &[true] };
    for &missing_left in directions {
        let mut left = if missing_left { missing } else { Bin::default() };
        for k in 0..present.len() - 1 {
            left.add(&hist[present[k].0 as usize]);
            let right = total.minus(&left);
            if !admissible(&left, config) || !admissible(&right, config) {
                continue;
            }
            let gain = eval.gain(&left, &right);
            if gain > eval.threshold && best.is_none_or(|(g, _, _)| gain > g) {
                best = Some((gain, k, missing_left));
            }
        }
    }
    best.map(|(gain, k, missing_left)| {
        let mut left: Vec<u32> = present[..=k].iter().map(|p| p.0).collect();
        let mut right: Vec<u32> = present[k + 1..].iter().map(|p| p.0).collect();
        left.sort_unstable();
        right.sort_unstable();
        Candidate {
            gain,
            rule: SplitRule::Categorical { feature, left, right },
            missing_left,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureMatrix, CATEGORY_MISSING};

    fn config(max_leaves: usize, lambda: f64) -> BoostConfig {
        BoostConfig {
            max_leaves,
            min_leaf_count: 1,
            min_leaf_hessian: 0.0,
            l2_leaf_reg: lambda,
            ..BoostConfig::default()
        }
    }

    #[test]
    fn perfect_binary_split_gain() {
        let m = FeatureMatrix::new(4, vec![vec![0.0, 0.0, 1.0, 1.0]], vec![]).unwrap();
        let data = BinnedDataset::new(&m, 255);
        let rows = [0, 1, 2, 3];
        let g = [-1.0, -1.0, 1.0, 1.0];
        let h = [1.0; 4];
        let positions: Vec<usize> = (0..4).collect();
        let total = sum_bins(&positions, &g, &h);
        let c = best_split(&data, &rows, &positions, total, &g, &h, &config(2, 0.0)).unwrap();
        assert_eq!(c.gain, 2.0);
        let grown = fit_tree(&data, &rows, &g, &h, &config(8, 0.0));
        assert_eq!(grown.tree.n_leaves(), 2);
        assert_eq!(grown.tree.leaves, vec![1.0, -1.0]);
    }

    #[test]
    fn constant_gradients_give_root_only() {
        let m = FeatureMatrix::new(6, vec![vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]], vec![]).unwrap();
        let data = BinnedDataset::new(&m, 255);
        let rows: Vec<usize> = (0..6).collect();
        let grown = fit_tree(&data, &rows, &[0.0; 6], &[1.0; 6], &config(8, 1.0));
        assert!(grown.tree.is_root_only());
        let grown = fit_tree(&data, &rows, &[0.3; 6], &[1.0; 6], &config(8, 1.0));
        assert!(grown.tree.is_root_only());
    }

    #[test]
    fn newton_leaf_values() {
        assert_eq!(leaf_values(&[0, 0], 1, &[2.0, 2.0], &[1.0, 1.0], 0.0), vec![-2.0]);
        assert_eq!(leaf_values(&[0], 1, &[1.0], &[0.0], 1.0), vec![-1.0]);
    }

    #[test]
    fn categorical_partition_orders_by_ratio() {
        let cats = vec![0, 1, 2, 0, 1, 2, CATEGORY_MISSING];
        let m = FeatureMatrix::new(7, vec![], vec![cats]).unwrap();
        let data = BinnedDataset::new(&m, 255);
        let rows: Vec<usize> = (0..7).collect();
        // categories 0 and 2 pull down, 1 pulls up
        let g = [-1.0, 1.0, -1.0, -1.0, 1.0, -1.0, 0.9];
        let grown = fit_tree(&data, &rows, &g, &[1.0; 7], &config(2, 0.0));
        let node = &grown.tree.nodes[0];
        match &node.rule {
            SplitRule::Categorical { left, right, .. } => {
                assert_eq!(left, &vec![0, 2]);
                assert_eq!(right, &vec![1]);
            }
            r => panic!("unexpected rule {r:?}"),
        }
        assert!(!node.missing_goes_left);
    }

    #[test]
    fn missing_direction_is_learned() {
        let x = vec![0.0, 1.0, 2.0, 3.0, f64::NAN, f64::NAN];
        let m = FeatureMatrix::new(6, vec![x], vec![]).unwrap();
        let data = BinnedDataset::new(&m, 255);
        let rows: Vec<usize> = (0..6).collect();
        let g = [-1.0, -1.0, 1.0, 1.0, 1.0, 1.0];
        let grown = fit_tree(&data, &rows, &g, &[1.0; 6], &config(2, 0.0));
        assert!(!grown.tree.nodes[0].missing_goes_left);
        assert_eq!(grown.leaf_of_row, vec![0, 0, 1, 1, 1, 1]);
    }

    #[test]
    fn respects_min_leaf_count() {
        let m = FeatureMatrix::new(4, vec![vec![0.0, 1.0, 2.0, 3.0]], vec![]).unwrap();
        let data = BinnedDataset::new(&m, 255);
        let rows: Vec<usize> = (0..4).collect();
        let cfg = BoostConfig { min_leaf_count: 3, ..config(8, 0.0) };
        let grown = fit_tree(&data, &rows, &[-5.0, 1.0, 1.0, 1.0], &[1.0; 4], &cfg);
        assert!(grown.tree.is_root_only());
    }
}
