use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureLayout, FeatureMatrix, FeatureVector, Features};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitRule {
    /// `x <= threshold` goes left.
    Numeric { feature: usize, threshold: f64 },
    /// Codes in `left` go left, codes in `right` go right, anything else
    /// follows the missing direction.
    Categorical {
        feature: usize,
        left: Vec<u32>,
        right: Vec<u32>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "index", rename_all = "snake_case")]
pub enum Child {
    Node(usize),
    Leaf(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitNode {
    pub rule: SplitRule,
    pub missing_goes_left: bool,
    pub left: Child,
    pub right: Child,
}

/// Binary regression tree. With no split nodes the tree is a single leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<SplitNode>,
    pub leaves: Vec<f64>,
}

impl DecisionTree {
    pub fn constant(value: f64) -> Self {
        Self {
            nodes: Vec::new(),
            leaves: vec![value],
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_root_only(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf_index<F: Features + ?Sized>(&self, x: &F) -> usize {
        if self.nodes.is_empty() {
            return 0;
        }
        let mut node = &self.nodes[0];
        loop {
            let go_left = match &node.rule {
                SplitRule::Numeric { feature, threshold } => match x.numeric(*feature) {
                    Some(v) => v <= *threshold,
                    None => node.missing_goes_left,
                },
                SplitRule::Categorical { feature, left, right } => match x.categorical(*feature) {
                    Some(c) if left.binary_search(&c).is_ok() => true,
                    Some(c) if right.binary_search(&c).is_ok() => false,
                    _ => node.missing_goes_left,
                },
            };
            match if go_left { node.left } else { node.right } {
                Child::Node(i) => node = &self.nodes[i],
                Child::Leaf(i) => return i,
            }
        }
    }

    pub fn predict<F: Features + ?Sized>(&self, x: &F) -> f64 {
        self.leaves[self.leaf_index(x)]
    }

    /// Checks that the node graph is a tree covering every leaf exactly once.
    pub fn validate(&self) -> Result<()> {
        if self.leaves.is_empty() {
            return Err(Error::Artifact("tree without leaves".into()));
        }
        if self.nodes.is_empty() {
            return if self.leaves.len() == 1 {
                Ok(())
            } else {
                Err(Error::Artifact("leaves unreachable from a root-only tree".into()))
            };
        }
        if self.leaves.len() != self.nodes.len() + 1 {
            return Err(Error::Artifact("tree must have one more leaf than split nodes".into()));
        }
        let mut node_seen = vec![false; self.nodes.len()];
        let mut leaf_seen = vec![false; self.leaves.len()];
        let mut stack = vec![0usize];
        node_seen[0] = true;
        while let Some(i) = stack.pop() {
            for child in [self.nodes[i].left, self.nodes[i].right] {
                match child {
                    Child::Node(j) => {
                        if j >= self.nodes.len() || node_seen[j] {
                            return Err(Error::Artifact(format!("bad node reference {j}")));
                        }
                        node_seen[j] = true;
                        stack.push(j);
                    }
                    Child::Leaf(j) => {
                        if j >= self.leaves.len() || leaf_seen[j] {
                            return Err(Error::Artifact(format!("bad leaf reference {j}")));
                        }
                        leaf_seen[j] = true;
                    }
                }
            }
        }
        if node_seen.iter().all(|&s| s) && leaf_seen.iter().all(|&s| s) {
            Ok(())
        } else {
            Err(Error::Artifact("tree has unreachable nodes".into()))
        }
    }

    fn scale_leaves(&mut self, factor: f64) {
        for v in &mut self.leaves {
            *v *= factor;
        }
    }
}

/// Additive model `base_score + sum of trees`. Leaf values already include
/// the learning rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub base_score: f64,
    pub trees: Vec<DecisionTree>,
    pub layout: FeatureLayout,
}

impl Ensemble {
    pub fn constant(base_score: f64, layout: FeatureLayout) -> Self {
        Self {
            base_score,
            trees: Vec::new(),
            layout,
        }
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    #[inline]
    pub fn predict_row<F: Features + ?Sized>(&self, x: &F) -> f64 {
        self.trees
            .iter()
            .fold(self.base_score, |acc, t| acc + t.predict(x))
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<f64> {
        if x.layout() != self.layout {
            return Err(Error::SchemaMismatch(format!(
                "model expects {:?} features, got {:?}",
                self.layout,
                x.layout()
            )));
        }
        Ok(self.predict_row(x))
    }

    pub fn predict_matrix(&self, m: &FeatureMatrix) -> Result<Vec<f64>> {
        if m.layout() != self.layout {
            return Err(Error::SchemaMismatch(format!(
                "model expects {:?} features, got {:?}",
                self.layout,
                m.layout()
            )));
        }
        Ok((0..m.n_rows)
            .into_par_iter()
            .map(|i| self.predict_row(&m.row(i)))
            .collect())
    }

    /// The same model with base score and every leaf multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.base_score *= factor;
        for t in &mut out.trees {
            t.scale_leaves(factor);
        }
        out
    }

    /// Sum of two ensembles over the same features.
    pub fn extended(&self, increment: &Ensemble) -> Self {
        let mut out = self.clone();
        out.base_score += increment.base_score;
        out.trees.extend(increment.trees.iter().cloned());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stump(threshold: f64, left: f64, right: f64, missing_left: bool) -> DecisionTree {
        DecisionTree {
            nodes: vec![SplitNode {
                rule: SplitRule::Numeric { feature: 0, threshold },
                missing_goes_left: missing_left,
                left: Child::Leaf(0),
                right: Child::Leaf(1),
            }],
            leaves: vec![left, right],
        }
    }

    fn layout() -> FeatureLayout {
        FeatureLayout { numeric: 1, categorical: 1 }
    }

    #[test]
    fn root_only_prediction() {
        let e = Ensemble {
            base_score: 1.7,
            trees: vec![DecisionTree::constant(0.0)],
            layout: layout(),
        };
        let x = FeatureVector::new(vec![Some(3.0)], vec![Some(1)]);
        assert_eq!(e.predict(&x).unwrap(), 1.7);
        assert_eq!(e.predict(&FeatureVector::missing(layout())).unwrap(), 1.7);
    }

    #[test]
    fn two_stumps_sum_by_hand() {
        let e = Ensemble {
            base_score: 0.5,
            trees: vec![stump(0.0, -1.0, 2.0, true), stump(1.0, 0.25, -0.75, false)],
            layout: layout(),
        };
        let at = |v: Option<f64>| e.predict(&FeatureVector::new(vec![v], vec![None])).unwrap();
        assert_eq!(at(Some(-1.0)), 0.5 - 1.0 + 0.25);
        assert_eq!(at(Some(0.5)), 0.5 + 2.0 + 0.25);
        assert_eq!(at(Some(3.0)), 0.5 + 2.0 - 0.75);
        assert_eq!(at(None), 0.5 - 1.0 - 0.75);
        assert_eq!(at(Some(f64::NAN)), at(None));
    }

    #[test]
    fn unseen_category_follows_missing() {
        let t = DecisionTree {
            nodes: vec![SplitNode {
                rule: SplitRule::Categorical { feature: 0, left: vec![0, 2], right: vec![1] },
                missing_goes_left: false,
                left: Child::Leaf(0),
                right: Child::Leaf(1),
            }],
            leaves: vec![1.0, 2.0],
        };
        let at = |c: Option<u32>| t.predict(&FeatureVector::new(vec![None], vec![c]));
        assert_eq!(at(Some(2)), 1.0);
        assert_eq!(at(Some(1)), 2.0);
        assert_eq!(at(Some(7)), 2.0);
        assert_eq!(at(None), 2.0);
    }

    #[test]
    fn layout_mismatch_is_an_error() {
        let e = Ensemble::constant(0.0, layout());
        assert!(e.predict(&FeatureVector::new(vec![Some(1.0)], vec![])).is_err());
    }

    #[test]
    fn validate_catches_cycles() {
        let mut t = stump(0.0, 1.0, 2.0, true);
        assert!(t.validate().is_ok());
        t.nodes[0].right = Child::Node(0);
        assert!(t.validate().is_err());
    }
}
