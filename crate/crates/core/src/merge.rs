//! Merging a weighted set of regression trees into one tree.
//!
//! The fold runs over the trees in the order given (ascending index for a
//! pruned selection). Every leaf of the accumulated tree is replaced by a copy
//! of the next tree whose leaves hold `accumulated + w · value`, so a merged
//! leaf stores `((w_0 v_0 + w_1 v_1) + w_2 v_2) + …`, the same arithmetic the
//! weighted forest prediction performs. Evaluating the merged tree does no
//! arithmetic at all.
//!
//! While grafting, each node carries the box of inputs that can reach it,
//! `[lower, upper)` per feature. A split with `upper ≤ θ` always goes left and
//! one with `lower ≥ θ` always goes right; such splits are replaced by the
//! reachable child.

use serde::{Deserialize, Serialize};

use crate::cart::{Node, RegressionTree};
use crate::error::{Error, Result};
use crate::forest::Forest;
use crate::pruning::PruneResult;

pub const DEFAULT_LEAF_BUDGET: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedTree {
    pub tree: RegressionTree,
    pub source_indices: Vec<usize>,
    pub source_weights: Vec<f64>,
    pub leaf_count: usize,
}

struct Builder<'a> {
    trees: &'a [&'a RegressionTree],
    weights: &'a [f64],
    nodes: Vec<Node>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    leaves: usize,
    budget: usize,
}

impl Builder<'_> {
    fn build(&mut self, k: usize, id: usize, acc: f64) -> Result<usize> {
        let tree = self.trees[k];
        match tree.nodes[id] {
            Node::Split {
                feature,
                threshold,
                left,
                right,
                count,
            } => {
                if self.upper[feature] <= threshold {
                    return self.build(k, left, acc);
                }
                if self.lower[feature] >= threshold {
                    return self.build(k, right, acc);
                }
                let out = self.nodes.len();
                self.nodes.push(Node::Leaf { value: 0.0, count: 0 });
                let saved = self.upper[feature];
                self.upper[feature] = threshold;
                let l = self.build(k, left, acc);
                self.upper[feature] = saved;
                let l = l?;
                let saved = self.lower[feature];
                self.lower[feature] = threshold;
                let r = self.build(k, right, acc);
                self.lower[feature] = saved;
                let r = r?;
                self.nodes[out] = Node::Split {
                    feature,
                    threshold,
                    left: l,
                    right: r,
                    count: if k == 0 { count } else { 0 },
                };
                Ok(out)
            }
            Node::Leaf { value, count } => {
                let v = if k == 0 {
                    self.weights[0] * value
                } else {
                    acc + self.weights[k] * value
                };
                if k + 1 < self.trees.len() {
                    return self.build(k + 1, self.trees[k + 1].root, v);
                }
                self.leaves += 1;
                if self.leaves > self.budget {
                    return Err(Error::LeafBudget { budget: self.budget });
                }
                self.nodes.push(Node::Leaf {
                    value: v,
                    count: if k == 0 { count } else { 0 },
                });
                Ok(self.nodes.len() - 1)
            }
        }
    }
}

fn fold(trees: &[&RegressionTree], weights: &[f64], budget: usize) -> Result<RegressionTree> {
    let width = trees
        .iter()
        .filter_map(|t| t.max_feature_index())
        .max()
        .map_or(0, |f| f + 1);
    let mut b = Builder {
        trees,
        weights,
        nodes: Vec::new(),
        lower: vec![f64::NEG_INFINITY; width],
        upper: vec![f64::INFINITY; width],
        leaves: 0,
        budget,
    };
    let root = b.build(0, trees[0].root, 0.0)?;
    Ok(RegressionTree { root, nodes: b.nodes })
}

/// Merges `trees` with `weights` under the default leaf budget.
pub fn merge_trees(trees: &[RegressionTree], weights: &[f64]) -> Result<MergedTree> {
    merge_trees_with_budget(trees, weights, DEFAULT_LEAF_BUDGET)
}

pub fn merge_trees_with_budget(trees: &[RegressionTree], weights: &[f64], leaf_budget: usize) -> Result<MergedTree> {
    if trees.is_empty() {
        return Err(Error::invalid("nothing to merge"));
    }
    if weights.len() != trees.len() {
        return Err(Error::invalid(format!(
            "{} weights for {} trees",
            weights.len(),
            trees.len()
        )));
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::invalid("merge weights must be finite"));
    }
    for t in trees {
        t.validate()?;
    }
    let refs: Vec<&RegressionTree> = trees.iter().collect();
    let tree = fold(&refs, weights, leaf_budget)?;
    Ok(MergedTree {
        leaf_count: tree.leaf_count(),
        tree,
        source_indices: (0..trees.len()).collect(),
        source_weights: weights.to_vec(),
    })
}

/// Merges the trees a pruning run selected, in ascending index order.
pub fn merge_selection(forest: &Forest, result: &PruneResult, leaf_budget: usize) -> Result<MergedTree> {
    if let Some(&bad) = result.selected.iter().find(|&&i| i >= forest.len()) {
        return Err(Error::invalid(format!(
            "prune result selects tree {bad} but the forest has {} trees",
            forest.len()
        )));
    }
    let trees: Vec<RegressionTree> = result.selected.iter().map(|&i| forest.trees[i].clone()).collect();
    let mut merged = merge_trees_with_budget(&trees, &result.weights, leaf_budget)?;
    merged.source_indices = result.selected.clone();
    Ok(merged)
}

/// Collapses every split whose outcome is fixed by its ancestors' conditions.
pub fn infeasible_branch_prune(tree: &RegressionTree) -> Result<RegressionTree> {
    tree.validate()?;
    fold(&[tree], &[1.0], usize::MAX)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn stump(feature: usize, threshold: f64, left: f64, right: f64) -> RegressionTree {
        RegressionTree {
            root: 0,
            nodes: vec![
                Node::Split {
                    feature,
                    threshold,
                    left: 1,
                    right: 2,
                    count: 10,
                },
                Node::Leaf { value: left, count: 4 },
                Node::Leaf { value: right, count: 6 },
            ],
        }
    }

    fn random_tree(rng: &mut SeededRng, depth: usize, d: usize) -> RegressionTree {
        fn go(rng: &mut SeededRng, depth: usize, d: usize, nodes: &mut Vec<Node>) -> usize {
            let id = nodes.len();
            if depth == 0 || rng.uniform() < 0.25 {
                nodes.push(Node::Leaf {
                    value: (rng.normal() * 8.0).round() / 4.0,
                    count: 1,
                });
                return id;
            }
            nodes.push(Node::Leaf { value: 0.0, count: 0 });
            let feature = rng.below(d);
            let threshold = (rng.normal() * 4.0).round() / 2.0;
            let left = go(rng, depth - 1, d, nodes);
            let right = go(rng, depth - 1, d, nodes);
            nodes[id] = Node::Split {
                feature,
                threshold,
                left,
                right,
                count: 2,
            };
            id
        }
        let mut nodes = Vec::new();
        let root = go(rng, depth, d, &mut nodes);
        RegressionTree { root, nodes }
    }

    #[test]
    fn figure_ten_example() {
        let a = stump(0, 5.0, 1.0, 6.0);
        let b = stump(0, 3.0, 4.0, 2.0);
        let m = merge_trees(&[a, b], &[0.5, 0.5]).unwrap();
        let t = &m.tree;
        match t.nodes[t.root] {
            Node::Split { threshold, right, .. } => {
                assert_eq!(threshold, 5.0);
                assert_eq!(t.nodes[right], Node::Leaf { value: 4.0, count: 0 });
            }
            _ => panic!("root should split"),
        }
        assert_eq!(m.leaf_count, 3);
        assert_eq!(t.predict(&[2.0]), 2.5);
        assert_eq!(t.predict(&[4.0]), 1.5);
    }

    #[test]
    fn single_tree_identity() {
        let d = crate::data::generate_scenario(&crate::data::ScenarioConfig::new(300, 2, 0.1, 1)).unwrap();
        let rows: Vec<usize> = (0..300).collect();
        let t = crate::cart::fit_tree(&d, &rows, &[true; 10], &Default::default()).unwrap();
        let m = merge_trees(std::slice::from_ref(&t), &[1.0]).unwrap();
        assert_eq!(m.tree, t);
    }

    #[test]
    fn self_merge_halves_reproduce_tree() {
        let mut rng = SeededRng::new(2);
        for _ in 0..20 {
            let t = random_tree(&mut rng, 4, 3);
            let m = merge_trees(&[t.clone(), t.clone()], &[0.5, 0.5]).unwrap();
            for _ in 0..1000 {
                let x: Vec<f64> = (0..3).map(|_| rng.normal() * 3.0).collect();
                assert_eq!(m.tree.predict(&x), t.predict(&x));
            }
            assert_eq!(m.leaf_count, infeasible_branch_prune(&t).unwrap().leaf_count());
        }
    }

    #[test]
    fn implied_condition_collapses() {
        // x0 < 2 then x0 < 3: the inner split is always true.
        let t = RegressionTree {
            root: 0,
            nodes: vec![
                Node::Split {
                    feature: 0,
                    threshold: 2.0,
                    left: 1,
                    right: 4,
                    count: 0,
                },
                Node::Split {
                    feature: 0,
                    threshold: 3.0,
                    left: 2,
                    right: 3,
                    count: 0,
                },
                Node::Leaf { value: 1.0, count: 0 },
                Node::Leaf { value: 2.0, count: 0 },
                Node::Leaf { value: 3.0, count: 0 },
            ],
        };
        let p = infeasible_branch_prune(&t).unwrap();
        assert_eq!(p.leaf_count(), 2);
        assert_eq!(p, stump(0, 2.0, 1.0, 3.0).with_counts(0));
        let clean = stump(1, 0.5, -1.0, 1.0);
        assert_eq!(infeasible_branch_prune(&clean).unwrap(), clean);
    }

    #[test]
    fn pruning_preserves_predictions() {
        let mut rng = SeededRng::new(3);
        for _ in 0..30 {
            let t = random_tree(&mut rng, 6, 2);
            let p = infeasible_branch_prune(&t).unwrap();
            assert!(p.leaf_count() <= t.leaf_count());
            for _ in 0..1000 {
                let x: Vec<f64> = (0..2).map(|_| rng.normal() * 3.0).collect();
                assert_eq!(p.predict(&x), t.predict(&x));
            }
        }
    }

    #[test]
    fn merged_depth_is_additive_bound() {
        let mut rng = SeededRng::new(4);
        for _ in 0..20 {
            let ts: Vec<RegressionTree> = (0..3).map(|_| random_tree(&mut rng, 3, 3)).collect();
            let w = [0.2, 0.3, 0.5];
            let m = merge_trees(&ts, &w).unwrap();
            assert!(m.tree.depth() <= ts.iter().map(|t| t.depth()).sum::<usize>());
            assert!(m.leaf_count <= ts.iter().map(|t| t.leaf_count()).product::<usize>());
            for _ in 0..200 {
                let x: Vec<f64> = (0..3).map(|_| rng.normal() * 3.0).collect();
                let expect = 0.0 + w[0] * ts[0].predict(&x) + w[1] * ts[1].predict(&x) + w[2] * ts[2].predict(&x);
                assert_eq!(m.tree.predict(&x), expect);
            }
        }
    }

    #[test]
    fn errors_and_budget() {
        let t = stump(0, 1.0, 0.0, 1.0);
        assert!(merge_trees(std::slice::from_ref(&t), &[0.5, 0.5]).is_err());
        assert!(merge_trees(&[], &[]).is_err());
        let u = stump(1, 1.0, 0.0, 1.0);
        let err = merge_trees_with_budget(&[t.clone(), u.clone()], &[0.5, 0.5], 3).unwrap_err();
        assert!(matches!(err, Error::LeafBudget { budget: 3 }));
        assert_eq!(merge_trees_with_budget(&[t, u], &[0.5, 0.5], 4).unwrap().leaf_count, 4);
    }

    impl RegressionTree {
        fn with_counts(mut self, c: usize) -> Self {
            for n in &mut self.nodes {
                match n {
                    Node::Split { count, .. } | Node::Leaf { count, .. } => *count = c,
                }
            }
            self
        }
    }
}
