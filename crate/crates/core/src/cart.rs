//! CART regression trees: greedy binary splitting on squared error with
//! rpart-style early stopping.
//!
//! Split search is exact. Each active feature is presorted once per tree and
//! the sorted sample lists are stably partitioned as the tree grows, so every
//! node costs `O(n_node · d)`. Candidate thresholds sit at midpoints between
//! adjacent distinct values and routing sends a row left iff
//! `value < threshold`. Ties between equally good splits go to the lowest
//! feature index, then the lowest threshold.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Stopping rules. Defaults follow rpart: `minsplit = 20`, `minbucket = 7`,
/// `cp = 0.01`, `maxdepth = 30`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CartParams {
    /// Smallest node that may be split.
    pub min_split: usize,
    /// Smallest allowed child.
    pub min_bucket: usize,
    /// A split must reduce SSE by at least `cp × root SSE`.
    pub cp: f64,
    /// Nodes at this depth (root = 0) are never split.
    pub max_depth: usize,
}

impl Default for CartParams {
    fn default() -> Self {
        Self {
            min_split: 20,
            min_bucket: 7,
            cp: 0.01,
            max_depth: 30,
        }
    }
}

impl CartParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_bucket == 0 {
            return Err(Error::config("min_bucket must be >= 1"));
        }
        if !(self.cp >= 0.0 && self.cp.is_finite()) {
            return Err(Error::config(format!("cp must be >= 0, got {}", self.cp)));
        }
        if self.min_split < 2 * self.min_bucket {
            log::warn!(
                "min_split ({}) < 2 * min_bucket ({}): min_bucket is the binding constraint",
                self.min_split,
                self.min_bucket
            );
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Training samples reaching this node.
        count: usize,
    },
    Leaf {
        value: f64,
        count: usize,
    },
}

/// Binary piecewise-constant predictor stored as a node arena.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub root: usize,
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn constant(value: f64) -> Self {
        Self {
            root: 0,
            nodes: vec![Node::Leaf { value, count: 0 }],
        }
    }

    /// Value of the unique leaf whose path conditions `row` satisfies.
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.nodes[self.leaf_id(row)].leaf_value()
    }

    /// Node id of the leaf `row` is routed to.
    pub fn leaf_id(&self, row: &[f64]) -> usize {
        let mut id = self.root;
        loop {
            match self.nodes[id] {
                Node::Leaf { .. } => return id,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => id = if row[feature] < threshold { left } else { right },
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.reachable()
            .into_iter()
            .filter(|&id| matches!(self.nodes[id], Node::Leaf { .. }))
            .count()
    }

    /// Number of splits on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn go(t: &RegressionTree, id: usize) -> usize {
            match t.nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, self.root)
    }

    /// Largest feature index any split reads, if the tree splits at all.
    pub fn max_feature_index(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }

    fn reachable(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            out.push(id);
            if let Node::Split { left, right, .. } = self.nodes[id] {
                stack.push(right);
                stack.push(left);
            }
        }
        out
    }

    /// Checks the arena forms a single-rooted binary tree: every id in range,
    /// every node reached exactly once from the root.
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        if self.root >= n {
            return Err(Error::invalid("tree root out of range"));
        }
        let mut seen = vec![false; n];
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            if id >= n {
                return Err(Error::invalid(format!("tree node id {id} out of range")));
            }
            if std::mem::replace(&mut seen[id], true) {
                return Err(Error::invalid(format!("tree node {id} reached twice")));
            }
            match &self.nodes[id] {
                Node::Split {
                    left, right, threshold, ..
                } => {
                    if !threshold.is_finite() {
                        return Err(Error::invalid(format!("node {id} has a non-finite threshold")));
                    }
                    stack.push(*right);
                    stack.push(*left);
                }
                Node::Leaf { value, .. } => {
                    if !value.is_finite() {
                        return Err(Error::invalid(format!("leaf {id} has a non-finite value")));
                    }
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::invalid("tree arena has unreachable nodes"));
        }
        Ok(())
    }

    /// Indented dump, one condition per line.
    pub fn to_text(&self, column_names: Option<&[String]>) -> String {
        let name = |f: usize| match column_names.and_then(|c| c.get(f)) {
            Some(n) => n.clone(),
            None => format!("x[{f}]"),
        };
        let mut out = String::new();
        let mut stack = vec![(self.root, 0usize, None::<String>)];
        while let Some((id, indent, cond)) = stack.pop() {
            let pad = "  ".repeat(indent);
            let inner = match cond {
                Some(c) => {
                    let _ = writeln!(out, "{pad}{c}");
                    indent + 1
                }
                None => indent,
            };
            match &self.nodes[id] {
                Node::Leaf { value, count } => {
                    let _ = writeln!(out, "{}-> {value} (n={count})", "  ".repeat(inner));
                }
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    let f = name(*feature);
                    stack.push((*right, inner, Some(format!("{f} >= {threshold}"))));
                    stack.push((*left, inner, Some(format!("{f} < {threshold}"))));
                }
            }
        }
        out
    }
}

impl Node {
    pub(crate) fn leaf_value(&self) -> f64 {
        match self {
            Node::Leaf { value, .. } => *value,
            Node::Split { .. } => unreachable!("routing always ends at a leaf"),
        }
    }
}

/// Fits a tree on `rows` of `dataset` (duplicates allowed, as in a bootstrap
/// resample) using only the features whose `feature_mask` entry is true.
pub fn fit_tree(
    dataset: &Dataset,
    rows: &[usize],
    feature_mask: &[bool],
    params: &CartParams,
) -> Result<RegressionTree> {
    let active = check_inputs(dataset, rows, feature_mask, params)?;
    let samples = Samples::sorted(dataset, rows, &active);
    Ok(grow(samples, params))
}

fn check_inputs(dataset: &Dataset, rows: &[usize], feature_mask: &[bool], params: &CartParams) -> Result<Vec<usize>> {
    params.validate()?;
    if rows.is_empty() {
        return Err(Error::invalid("cannot fit a tree on zero rows"));
    }
    dataset.check_indices(rows)?;
    if feature_mask.len() != dataset.n_cols() {
        return Err(Error::invalid(format!(
            "feature mask has {} entries for {} columns",
            feature_mask.len(),
            dataset.n_cols()
        )));
    }
    let active: Vec<usize> = (0..feature_mask.len()).filter(|&f| feature_mask[f]).collect();
    if active.is_empty() {
        return Err(Error::invalid("feature mask selects no features"));
    }
    Ok(active)
}

/// Per-feature ascending order of a dataset's rows, keyed by `(value, row)`.
/// Shared by every tree of a forest trained on the same rows.
pub(crate) struct RowOrder {
    per_feature: Vec<Vec<u32>>,
}

impl RowOrder {
    pub(crate) fn new(dataset: &Dataset, rows: &[usize]) -> Self {
        let mut unique = rows.to_vec();
        unique.sort_unstable();
        unique.dedup();
        let per_feature = (0..dataset.n_cols())
            .map(|f| {
                let mut order: Vec<u32> = unique.iter().map(|&r| r as u32).collect();
                order.sort_by(|&a, &b| {
                    dataset
                        .value(a as usize, f)
                        .total_cmp(&dataset.value(b as usize, f))
                        .then(a.cmp(&b))
                });
                order
            })
            .collect();
        Self { per_feature }
    }
}

/// Fits a tree on a multiset of rows given as per-row counts, reusing a
/// presorted [`RowOrder`]. Produces exactly the tree [`fit_tree`] builds on the
/// expanded row list.
pub(crate) fn fit_tree_counts(
    dataset: &Dataset,
    order: &RowOrder,
    counts: &[u32],
    feature_mask: &[bool],
    params: &CartParams,
) -> Result<RegressionTree> {
    let rows: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(r, &c)| std::iter::repeat_n(r, c as usize))
        .collect();
    let active = check_inputs(dataset, &rows, feature_mask, params)?;
    let samples = Samples::from_counts(dataset, order, counts, &active);
    Ok(grow(samples, params))
}

struct Samples {
    features: Vec<usize>,
    /// `xs[k][s]`: value of active feature `k` for sample `s`.
    xs: Vec<Vec<f64>>,
    y: Vec<f64>,
    /// `order[k]`: sample ids sorted by active feature `k`, partitioned by node.
    order: Vec<Vec<u32>>,
}

impl Samples {
    fn gather(dataset: &Dataset, sample_rows: &[usize], active: &[usize]) -> (Vec<Vec<f64>>, Vec<f64>) {
        let xs = active
            .iter()
            .map(|&f| sample_rows.iter().map(|&r| dataset.value(r, f)).collect())
            .collect();
        let y = sample_rows.iter().map(|&r| dataset.response()[r]).collect();
        (xs, y)
    }

    fn sorted(dataset: &Dataset, rows: &[usize], active: &[usize]) -> Self {
        let (xs, y) = Self::gather(dataset, rows, active);
        let order = xs
            .iter()
            .map(|x| {
                let mut o: Vec<u32> = (0..rows.len() as u32).collect();
                o.sort_by(|&a, &b| {
                    x[a as usize]
                        .total_cmp(&x[b as usize])
                        .then(rows[a as usize].cmp(&rows[b as usize]))
                });
                o
            })
            .collect();
        Self {
            features: active.to_vec(),
            xs,
            y,
            order,
        }
    }

    fn from_counts(dataset: &Dataset, order: &RowOrder, counts: &[u32], active: &[usize]) -> Self {
        // Sample ids are assigned in ascending row order; copies of one row are
        // consecutive ids.
        let mut first_sample = vec![0u32; counts.len()];
        let mut sample_rows = Vec::new();
        for (r, &c) in counts.iter().enumerate() {
            first_sample[r] = sample_rows.len() as u32;
            sample_rows.extend(std::iter::repeat_n(r, c as usize));
        }
        let (xs, y) = Self::gather(dataset, &sample_rows, active);
        let order = active
            .iter()
            .map(|&f| {
                let mut o = Vec::with_capacity(sample_rows.len());
                for &r in &order.per_feature[f] {
                    let c = counts[r as usize];
                    let s0 = first_sample[r as usize];
                    o.extend(s0..s0 + c);
                }
                o
            })
            .collect();
        Self {
            features: active.to_vec(),
            xs,
            y,
            order,
        }
    }
}

struct Grower<'a> {
    s: Samples,
    /// Responses centred on the overall mean, used for split gains.
    yc: Vec<f64>,
    params: &'a CartParams,
    min_gain: f64,
    nodes: Vec<Node>,
    goes_left: Vec<bool>,
    scratch: Vec<u32>,
}

struct BestSplit {
    gain: f64,
    k: usize,
    threshold: f64,
}

fn grow(s: Samples, params: &CartParams) -> RegressionTree {
    let n = s.y.len();
    let mean = s.y.iter().sum::<f64>() / n as f64;
    let yc: Vec<f64> = s.y.iter().map(|v| v - mean).collect();
    let root_sse: f64 = yc.iter().map(|v| v * v).sum();
    let scale: f64 = s.y.iter().map(|v| v * v).sum();
    let min_gain = (params.cp * root_sse).max(scale * f64::EPSILON);
    let mut g = Grower {
        goes_left: vec![false; n],
        scratch: Vec::with_capacity(n),
        yc,
        params,
        min_gain,
        nodes: Vec::new(),
        s,
    };
    let root = g.build(0, n, 0);
    RegressionTree { root, nodes: g.nodes }
}

impl Grower<'_> {
    fn build(&mut self, lo: usize, hi: usize, depth: usize) -> usize {
        let n = hi - lo;
        let id = self.nodes.len();
        let best = if n >= self.params.min_split && depth < self.params.max_depth {
            self.best_split(lo, hi)
        } else {
            None
        };
        match best {
            Some(b) if b.gain >= self.min_gain && b.gain > 0.0 => {
                self.nodes.push(Node::Leaf { value: 0.0, count: n });
                let mid = self.partition(lo, hi, b.k, b.threshold);
                let left = self.build(lo, mid, depth + 1);
                let right = self.build(mid, hi, depth + 1);
                self.nodes[id] = Node::Split {
                    feature: self.s.features[b.k],
                    threshold: b.threshold,
                    left,
                    right,
                    count: n,
                };
            }
            _ => {
                let sum: f64 = self.s.order[0][lo..hi].iter().map(|&i| self.s.y[i as usize]).sum();
                self.nodes.push(Node::Leaf {
                    value: sum / n as f64,
                    count: n,
                });
            }
        }
        id
    }

    fn best_split(&self, lo: usize, hi: usize) -> Option<BestSplit> {
        let n = hi - lo;
        let min_bucket = self.params.min_bucket;
        if n < 2 * min_bucket {
            return None;
        }
        let total: f64 = self.s.order[0][lo..hi].iter().map(|&i| self.yc[i as usize]).sum();
        let base = total * total / n as f64;
        let mut best: Option<BestSplit> = None;
        for (k, order) in self.s.order.iter().enumerate() {
            let x = &self.s.xs[k];
            let slice = &order[lo..hi];
            let mut left_sum = 0.0;
            for i in 0..n - 1 {
                let s = slice[i] as usize;
                left_sum += self.yc[s];
                let n_left = i + 1;
                let n_right = n - n_left;
                if n_left < min_bucket {
                    continue;
                }
                if n_right < min_bucket {
                    break;
                }
                let (a, b) = (x[s], x[slice[i + 1] as usize]);
                if a >= b {
                    continue;
                }
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / n_left as f64 + right_sum * right_sum / n_right as f64 - base;
                if best.as_ref().is_none_or(|bs| gain > bs.gain) {
                    let mut threshold = 0.5 * (a + b);
                    if threshold <= a {
                        threshold = b;
                    }
                    best = Some(BestSplit { gain, k, threshold });
                }
            }
        }
        best
    }

    /// Stable partition of every feature's order slice; returns the boundary.
    fn partition(&mut self, lo: usize, hi: usize, k: usize, threshold: f64) -> usize {
        let x = &self.s.xs[k];
        for &i in &self.s.order[k][lo..hi] {
            self.goes_left[i as usize] = x[i as usize] < threshold;
        }
        let mut mid = lo;
        for order in &mut self.s.order {
            self.scratch.clear();
            let slice = &mut order[lo..hi];
            let mut w = 0;
            for r in 0..slice.len() {
                let id = slice[r];
                if self.goes_left[id as usize] {
                    slice[w] = id;
                    w += 1;
                } else {
                    self.scratch.push(id);
                }
            }
            slice[w..].copy_from_slice(&self.scratch);
            mid = lo + w;
        }
        mid
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn step_dataset(n: usize, seed: u64) -> Dataset {
        let mut rng = SeededRng::new(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.normal(), rng.normal()]).collect();
        let y = rows.iter().map(|r| if r[0] > 0.0 { 10.0 } else { 0.0 }).collect();
        Dataset::from_rows(&rows, y).unwrap()
    }

    fn all_rows(ds: &Dataset) -> Vec<usize> {
        (0..ds.n_rows()).collect()
    }

    /// Exhaustive single-split search: every feature, every midpoint.
    fn brute_force_stump(ds: &Dataset, min_bucket: usize) -> (usize, f64, f64, f64) {
        let y = ds.response();
        let sse = |idx: &[usize]| {
            let m = idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64;
            idx.iter().map(|&i| (y[i] - m).powi(2)).sum::<f64>()
        };
        let mut best = (0, 0.0, f64::INFINITY, 0.0);
        for f in 0..ds.n_cols() {
            let mut vals: Vec<f64> = (0..ds.n_rows()).map(|i| ds.value(i, f)).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let t = 0.5 * (w[0] + w[1]);
                let (l, r): (Vec<usize>, Vec<usize>) = (0..ds.n_rows()).partition(|&i| ds.value(i, f) < t);
                if l.len() < min_bucket || r.len() < min_bucket {
                    continue;
                }
                let total = sse(&l) + sse(&r);
                if total < best.2 {
                    let lm = l.iter().map(|&i| y[i]).sum::<f64>() / l.len() as f64;
                    best = (f, t, total, lm);
                }
            }
        }
        best
    }

    #[test]
    fn single_row_is_a_leaf() {
        let ds = Dataset::from_rows(&[vec![1.0, 2.0]], vec![4.5]).unwrap();
        let t = fit_tree(&ds, &[0], &[true, true], &CartParams::default()).unwrap();
        assert_eq!(t.nodes, vec![Node::Leaf { value: 4.5, count: 1 }]);
    }

    #[test]
    fn step_function_gives_one_split() {
        let ds = step_dataset(200, 3);
        let t = fit_tree(&ds, &all_rows(&ds), &[true, true], &CartParams::default()).unwrap();
        assert_eq!(t.depth(), 1);
        let (f, thr, _, left_mean) = brute_force_stump(&ds, 7);
        match &t.nodes[t.root] {
            Node::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                assert_eq!((*feature, *threshold), (f, thr));
                assert!(threshold.abs() < 0.1);
                assert_eq!(t.nodes[*left].leaf_value(), left_mean);
                assert_eq!(t.nodes[*left].leaf_value(), 0.0);
                assert_eq!(t.nodes[*right].leaf_value(), 10.0);
            }
            other => panic!("expected a split, got {other:?}"),
        }
    }

    #[test]
    fn cp_above_one_gives_global_mean() {
        let ds = step_dataset(100, 4);
        let params = CartParams {
            cp: 1.5,
            ..CartParams::default()
        };
        let t = fit_tree(&ds, &all_rows(&ds), &[true, true], &params).unwrap();
        assert_eq!(t.nodes.len(), 1);
        let mean = ds.response().iter().sum::<f64>() / 100.0;
        assert!((t.predict(&[0.0, 0.0]) - mean).abs() < 1e-12);
    }

    #[test]
    fn constant_response_is_single_leaf() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64]).collect();
        let ds = Dataset::from_rows(&rows, vec![0.1; 50]).unwrap();
        let params = CartParams {
            cp: 0.0,
            ..CartParams::default()
        };
        let t = fit_tree(&ds, &all_rows(&ds), &[true], &params).unwrap();
        assert_eq!(t.nodes.len(), 1);
    }

    #[test]
    fn routing_and_constant_trees() {
        let t = RegressionTree::constant(3.5);
        assert_eq!(t.predict(&[100.0, -4.0]), 3.5);
        let stump = RegressionTree {
            root: 0,
            nodes: vec![
                Node::Split {
                    feature: 0,
                    threshold: 0.0,
                    left: 1,
                    right: 2,
                    count: 0,
                },
                Node::Leaf { value: 0.0, count: 0 },
                Node::Leaf { value: 10.0, count: 0 },
            ],
        };
        assert_eq!(stump.predict(&[-1.0]), 0.0);
        assert_eq!(stump.predict(&[0.0]), 10.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let ds = step_dataset(30, 1);
        let p = CartParams::default();
        assert!(fit_tree(&ds, &[], &[true, true], &p).is_err());
        assert!(fit_tree(&ds, &[0, 1], &[false, false], &p).is_err());
        assert!(fit_tree(&ds, &[0, 99], &[true, true], &p).is_err());
        assert!(fit_tree(&ds, &[0, 1], &[true], &p).is_err());
    }

    #[test]
    fn counts_path_matches_row_list_path() {
        let mut rng = SeededRng::new(8);
        let rows: Vec<Vec<f64>> = (0..300)
            .map(|_| (0..4).map(|_| (rng.normal() * 4.0).round()).collect())
            .collect();
        let y = rows.iter().map(|r| r[0] * r[1] + rng.normal()).collect();
        let ds = Dataset::from_rows(&rows, y).unwrap();
        let train: Vec<usize> = (0..250).collect();
        let order = RowOrder::new(&ds, &train);
        let mut counts = vec![0u32; ds.n_rows()];
        let mut list = Vec::new();
        for _ in 0..train.len() {
            let r = train[rng.below(train.len())];
            counts[r] += 1;
            list.push(r);
        }
        let mask = [true, false, true, true];
        let p = CartParams {
            cp: 0.001,
            ..CartParams::default()
        };
        let a = fit_tree(&ds, &list, &mask, &p).unwrap();
        let b = fit_tree_counts(&ds, &order, &counts, &mask, &p).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn text_dump_lists_conditions() {
        let ds = step_dataset(200, 3);
        let t = fit_tree(&ds, &all_rows(&ds), &[true, true], &CartParams::default()).unwrap();
        let text = t.to_text(Some(ds.column_names()));
        assert!(text.starts_with("x1 < "));
        assert!(text.contains("x1 >= "));
        assert_eq!(text.lines().filter(|l| l.contains("->")).count(), 2);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(40))]
        #[test]
        fn fitted_tree_invariants(seed in 0u64..10_000, n in 1usize..400, cp in 0.0f64..0.05) {
            let mut rng = SeededRng::new(seed);
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.normal()).collect()).collect();
            let y: Vec<f64> = rows.iter().map(|r| r[0].sin() * 3.0 + r[1] + 0.3 * rng.normal()).collect();
            let ds = Dataset::from_rows(&rows, y.clone()).unwrap();
            let params = CartParams { cp, ..CartParams::default() };
            let idx: Vec<usize> = (0..n).collect();
            let t = fit_tree(&ds, &idx, &[true, true, true], &params).unwrap();
            t.validate().unwrap();

            for node in &t.nodes {
                match node {
                    Node::Split { left, right, count, .. } => {
                        let c = |id: usize| match t.nodes[id] { Node::Split { count, .. } | Node::Leaf { count, .. } => count };
                        proptest::prop_assert_eq!(c(*left) + c(*right), *count);
                    }
                    Node::Leaf { count, .. } => {
                        if t.nodes.len() > 1 {
                            proptest::prop_assert!(*count >= params.min_bucket);
                        }
                    }
                }
            }

            let preds: Vec<f64> = rows.iter().map(|r| t.predict(r)).collect();
            let mean = y.iter().sum::<f64>() / n as f64;
            let sse_tree: f64 = preds.iter().zip(&y).map(|(p, v)| (p - v).powi(2)).sum();
            let sse_mean: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
            proptest::prop_assert!(sse_tree <= sse_mean * (1.0 + 1e-12) + 1e-12);
            let pred_mean = preds.iter().sum::<f64>() / n as f64;
            proptest::prop_assert!((pred_mean - mean).abs() <= 1e-9 * (1.0 + mean.abs()));

            // Perturbing a feature the tree never reads leaves predictions unchanged.
            let used: Vec<usize> = t.nodes.iter().filter_map(|n| match n { Node::Split { feature, .. } => Some(*feature), _ => None }).collect();
            if let Some(unused) = (0..3).find(|f| !used.contains(f)) {
                for r in &rows {
                    let mut p = r.clone();
                    p[unused] += 123.0;
                    proptest::prop_assert_eq!(t.predict(&p), t.predict(r));
                }
            }

            let again = fit_tree(&ds, &idx, &[true, true, true], &params).unwrap();
            proptest::prop_assert_eq!(serde_json::to_string(&t).unwrap(), serde_json::to_string(&again).unwrap());
        }
    }
}
