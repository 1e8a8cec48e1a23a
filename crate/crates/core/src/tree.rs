//! Single causal trees.
//!
//! A tree is grown on a subsample of size `s_n` drawn without replacement.
//! Splits are axis aligned (`x[f] <= v` goes left) and minimise the summed
//! squared deviation of the outcome in both children. Every child keeps at
//! least `max(l, ceil(alpha * s_n))` fitting instances and a node stops once
//! it holds at most `2l - 1`. With probability `pi` the split feature is drawn
//! uniformly from all `d` covariates before the value search, so each feature
//! is chosen with probability at least `pi / d`.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// Minimum child fraction of the subsample. `None` pins it to `l / s_n`.
    pub alpha: Option<f64>,
    /// `l`: leaves hold between `l` and `2l - 1` fitting instances.
    pub min_leaf: usize,
    /// Probability mass of the uniformly random split feature.
    pub pi: f64,
    /// `s_n / n`.
    pub subsample_ratio: f64,
    /// Choose splits on one half of the subsample and fill leaves from the other.
    pub honesty: bool,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            alpha: None,
            min_leaf: 50,
            pi: 0.1,
            subsample_ratio: 0.8,
            honesty: false,
        }
    }
}

impl TreeParams {
    pub fn with_min_leaf(min_leaf: usize) -> Self {
        Self {
            min_leaf,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_leaf == 0 {
            return Err(Error::InvalidParameter("min_leaf must be at least 1".into()));
        }
        if !(self.pi > 0.0 && self.pi < 1.0) {
            return Err(Error::InvalidParameter(format!("pi = {} is outside (0, 1)", self.pi)));
        }
        if !(self.subsample_ratio > 0.0 && self.subsample_ratio <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "subsample ratio {} is outside (0, 1]",
                self.subsample_ratio
            )));
        }
        if let Some(alpha) = self.alpha {
            if !(alpha > 0.0 && alpha <= 0.2) {
                return Err(Error::InvalidParameter(format!("alpha = {alpha} is outside (0, 0.2]")));
            }
        }
        Ok(())
    }

    /// Subsample size for a dataset of `n` rows.
    pub fn subsample_size(&self, n: usize) -> usize {
        (self.subsample_ratio * n as f64).round() as usize
    }
}

/// Half-open interval `(lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub const UNBOUNDED: Interval = Interval {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
    };

    pub fn contains(&self, v: f64) -> bool {
        self.lower < v && v <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NodeKind {
    Split {
        feature: usize,
        value: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        leaf_id: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub depth: usize,
    /// Instances of the split-deciding sample that reached this node.
    pub fit_count: usize,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    pub node: usize,
    /// Dataset indices recorded in the leaf (the estimation half when honest).
    pub members: Vec<usize>,
    /// No admissible split existed although the node was too large (or the
    /// whole subsample was smaller than `l`).
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalTree {
    nodes: Vec<Node>,
    leaves: Vec<Leaf>,
    d: usize,
    sample_size: usize,
    min_child: usize,
    params: TreeParams,
}

struct Grower<'a> {
    data: &'a Dataset,
    min_leaf: usize,
    min_child: usize,
    pi: f64,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
    leaves: Vec<Leaf>,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    feature: usize,
    value: f64,
    criterion: f64,
}

impl Grower<'_> {
    fn grow(&mut self, fit: Vec<usize>, est: Option<Vec<usize>>, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node {
            depth,
            fit_count: fit.len(),
            kind: NodeKind::Leaf { leaf_id: usize::MAX },
        });
        let m = fit.len();
        if m < 2 * self.min_leaf {
            self.make_leaf(id, fit, est, m < self.min_leaf);
            return id;
        }
        let d = self.data.d();
        let forced = if self.rng.random::<f64>() < self.pi {
            Some(self.rng.random_range(0..d))
        } else {
            None
        };
        let best = forced
            .and_then(|f| self.best_split_on(&fit, f))
            .or_else(|| self.best_split(&fit));
        let Some(split) = best else {
            self.make_leaf(id, fit, est, true);
            return id;
        };
        let goes_left = |i: &usize| self.data.row(*i)[split.feature] <= split.value;
        let (fit_l, fit_r): (Vec<usize>, Vec<usize>) = fit.into_iter().partition(goes_left);
        let (est_l, est_r) = match est {
            Some(e) => {
                let (l, r): (Vec<usize>, Vec<usize>) = e.into_iter().partition(goes_left);
                (Some(l), Some(r))
            }
            None => (None, None),
        };
        let left = self.grow(fit_l, est_l, depth + 1);
        let right = self.grow(fit_r, est_r, depth + 1);
        self.nodes[id].kind = NodeKind::Split {
            feature: split.feature,
            value: split.value,
            left,
            right,
        };
        id
    }

    fn make_leaf(&mut self, node: usize, fit: Vec<usize>, est: Option<Vec<usize>>, degenerate: bool) {
        let leaf_id = self.leaves.len();
        self.nodes[node].kind = NodeKind::Leaf { leaf_id };
        self.leaves.push(Leaf {
            node,
            members: est.unwrap_or(fit),
            degenerate,
        });
    }

    fn best_split(&self, fit: &[usize]) -> Option<Candidate> {
        let mut best: Option<Candidate> = None;
        for f in 0..self.data.d() {
            if let Some(c) = self.best_split_on(fit, f) {
                if best.is_none_or(|b| improves(c.criterion, b.criterion)) {
                    best = Some(c);
                }
            }
        }
        best
    }

    /// Lowest-SSE admissible threshold on feature `f`, smallest value on ties.
    fn best_split_on(&self, fit: &[usize], f: usize) -> Option<Candidate> {
        let m = fit.len();
        if m < 2 * self.min_child {
            return None;
        }
        let y = self.data.outcome();
        let mean = fit.iter().map(|&i| y[i]).sum::<f64>() / m as f64;
        let mut pairs: Vec<(f64, f64)> = fit
            .iter()
            .map(|&i| (self.data.row(i)[f], y[i] - mean))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let total_sq: f64 = pairs.iter().map(|p| p.1 * p.1).sum();

        let mut best: Option<Candidate> = None;
        let mut sum_l = 0.0;
        let mut sq_l = 0.0;
        for k in 1..=(m - self.min_child) {
            let (_, r) = pairs[k - 1];
            sum_l += r;
            sq_l += r * r;
            if k < self.min_child || pairs[k - 1].0 == pairs[k].0 {
                continue;
            }
            let n_l = k as f64;
            let n_r = (m - k) as f64;
            let sum_r = total - sum_l;
            let sq_r = total_sq - sq_l;
            let criterion = (sq_l - sum_l * sum_l / n_l) + (sq_r - sum_r * sum_r / n_r);
            if best.is_none_or(|b| improves(criterion, b.criterion)) {
                let (lo, hi) = (pairs[k - 1].0, pairs[k].0);
                let mid = lo + (hi - lo) / 2.0;
                let value = if mid < hi { mid } else { lo };
                best = Some(Candidate {
                    feature: f,
                    value,
                    criterion,
                });
            }
        }
        best
    }
}

/// Strict improvement up to rounding noise, so exact ties keep the earlier
/// (lower feature, smaller value) candidate.
fn improves(candidate: f64, incumbent: f64) -> bool {
    candidate < incumbent - 1e-10 * incumbent.abs().max(1e-300)
}

/// Fits one tree. Deterministic for fixed `(dataset, params, seed)`.
pub fn fit_tree(dataset: &Dataset, params: &TreeParams, seed: u64) -> Result<CausalTree> {
    params.validate()?;
    let n = dataset.n();
    let s_n = params.subsample_size(n);
    if s_n < 1 {
        return Err(Error::EmptySubsample(s_n));
    }
    let mut rng = rng_from_seed(seed);
    let mut subsample = rand::seq::index::sample(&mut rng, n, s_n).into_vec();
    let (fit, est) = if params.honesty {
        subsample.shuffle(&mut rng);
        let est = subsample.split_off(s_n.div_ceil(2));
        (subsample, Some(est))
    } else {
        subsample.sort_unstable();
        (subsample, None)
    };
    let sample_size = fit.len();
    let min_child = match params.alpha {
        None => params.min_leaf,
        Some(alpha) => params.min_leaf.max((alpha * sample_size as f64).ceil() as usize),
    };
    let mut grower = Grower {
        data: dataset,
        min_leaf: params.min_leaf,
        min_child,
        pi: params.pi,
        rng,
        nodes: Vec::new(),
        leaves: Vec::new(),
    };
    grower.grow(fit, est, 0);
    Ok(CausalTree {
        nodes: grower.nodes,
        leaves: grower.leaves,
        d: dataset.d(),
        sample_size,
        min_child,
        params: params.clone(),
    })
}

/// Upper bound `ceil(ln(alpha) / ln(1 - alpha))` on the depth of any leaf.
pub fn depth_bound(alpha: f64) -> Result<usize> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} is outside (0, 1)")));
    }
    Ok((alpha.ln() / (1.0 - alpha).ln()).ceil() as usize)
}

impl CausalTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaves(&self) -> &[Leaf] {
        &self.leaves
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn params(&self) -> &TreeParams {
        &self.params
    }

    /// Size of the sample the splits were chosen on.
    pub fn sample_size(&self) -> usize {
        self.sample_size
    }

    pub fn min_child(&self) -> usize {
        self.min_child
    }

    /// Alpha actually enforced, `l / s_n` unless overridden.
    pub fn effective_alpha(&self) -> f64 {
        self.params
            .alpha
            .unwrap_or(self.params.min_leaf as f64 / self.sample_size as f64)
    }

    pub fn max_depth(&self) -> usize {
        self.leaves.iter().map(|l| self.nodes[l.node].depth).max().unwrap_or(0)
    }

    pub fn leaf_depth(&self, leaf_id: usize) -> usize {
        self.nodes[self.leaves[leaf_id].node].depth
    }

    pub fn leaf_fit_count(&self, leaf_id: usize) -> usize {
        self.nodes[self.leaves[leaf_id].node].fit_count
    }

    /// `(feature, value)` of the root split, if the root was split.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes.first()?.kind {
            NodeKind::Split { feature, value, .. } => Some((feature, value)),
            NodeKind::Leaf { .. } => None,
        }
    }

    pub(crate) fn leaf_of(&self, x: &[f64]) -> usize {
        let mut node = 0;
        loop {
            match self.nodes[node].kind {
                NodeKind::Split {
                    feature,
                    value,
                    left,
                    right,
                } => node = if x[feature] <= value { left } else { right },
                NodeKind::Leaf { leaf_id } => return leaf_id,
            }
        }
    }

    /// Leaf reached by descending from the root, left iff `x[f] <= value`.
    pub fn assign_leaf(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: x.len(),
            });
        }
        Ok(self.leaf_of(x))
    }

    /// Leaf id of every dataset row.
    pub fn assign_all(&self, dataset: &Dataset) -> Vec<usize> {
        (0..dataset.n()).map(|i| self.leaf_of(dataset.row(i))).collect()
    }

    /// Per-dimension bounds of a leaf, `(-inf, +inf)` where unconstrained.
    pub fn leaf_box(&self, leaf_id: usize) -> Result<Vec<Interval>> {
        let target = self.leaves.get(leaf_id).ok_or(Error::UnknownLeaf(leaf_id))?.node;
        let mut bounds = vec![Interval::UNBOUNDED; self.d];
        let mut node = 0;
        while node != target {
            let NodeKind::Split {
                feature,
                value,
                left,
                right,
            } = self.nodes[node].kind
            else {
                unreachable!("leaf reached before target node");
            };
            // Children are allocated depth first, so the right subtree starts at `right`.
            if target < right {
                bounds[feature].upper = bounds[feature].upper.min(value);
                node = left;
            } else {
                bounds[feature].lower = bounds[feature].lower.max(value);
                node = right;
            }
        }
        Ok(bounds)
    }

    /// Plain-text listing of every node and leaf membership.
    pub fn dump(&self) -> String {
        let mut out = format!(
            "tree d={} s_n={} min_child={} leaves={}\n",
            self.d,
            self.sample_size,
            self.min_child,
            self.leaves.len()
        );
        for (id, node) in self.nodes.iter().enumerate() {
            match &node.kind {
                NodeKind::Split {
                    feature,
                    value,
                    left,
                    right,
                } => {
                    let _ = writeln!(
                        out,
                        "node {id} depth={} n={} split x{feature} <= {value} left={left} right={right}",
                        node.depth, node.fit_count
                    );
                }
                NodeKind::Leaf { leaf_id } => {
                    let leaf = &self.leaves[*leaf_id];
                    let members: Vec<String> = leaf.members.iter().map(usize::to_string).collect();
                    let _ = writeln!(
                        out,
                        "node {id} depth={} n={} leaf {leaf_id}{} members=[{}]",
                        node.depth,
                        node.fit_count,
                        if leaf.degenerate { " degenerate" } else { "" },
                        members.join(",")
                    );
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, FeatureKind, SyntheticSpec};
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    fn dataset(cov: Array2<f64>, y: Vec<f64>) -> Dataset {
        let n = cov.nrows();
        let d = cov.ncols();
        let t = (0..n).map(|i| i % 2 == 0).collect();
        Dataset::new(cov, t, y, None, vec![FeatureKind::Continuous; d]).unwrap()
    }

    fn full_sample(l: usize) -> TreeParams {
        TreeParams {
            subsample_ratio: 1.0,
            ..TreeParams::with_min_leaf(l)
        }
    }

    /// Every admissible threshold, scored independently of the prefix-sum scan.
    fn brute_force_root(ds: &Dataset, min_child: usize) -> Vec<(usize, f64, f64)> {
        let n = ds.n();
        let y = ds.outcome();
        let sse = |idx: &[usize]| {
            let m = idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64;
            idx.iter().map(|&i| (y[i] - m).powi(2)).sum::<f64>()
        };
        let mut out = Vec::new();
        for f in 0..ds.d() {
            let mut vals: Vec<f64> = (0..n).map(|i| ds.row(i)[f]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let v = (w[0] + w[1]) / 2.0;
                let (l, r): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| ds.row(i)[f] <= v);
                if l.len() >= min_child && r.len() >= min_child {
                    out.push((f, v, sse(&l) + sse(&r)));
                }
            }
        }
        out
    }

    #[test]
    fn pure_split_on_step_labels() {
        let ds = dataset(array![[0.0], [0.0], [1.0], [1.0]], vec![1.0, 1.0, 5.0, 5.0]);
        let candidates = brute_force_root(&ds, 2);
        assert_eq!(candidates, vec![(0, 0.5, 0.0)]);
        let tree = fit_tree(&ds, &full_sample(2), 0).unwrap();
        assert_eq!(tree.root_split(), Some((0, 0.5)));
        assert_eq!(tree.n_leaves(), 2);
        let mut members: Vec<Vec<usize>> = tree.leaves().iter().map(|l| l.members.clone()).collect();
        members.iter_mut().for_each(|m| m.sort());
        assert_eq!(members, vec![vec![0, 1], vec![2, 3]]);
        assert!(tree.leaves().iter().all(|l| !l.degenerate));
    }

    #[test]
    fn root_split_matches_brute_force() {
        let s = generate_synthetic(&SyntheticSpec::constant(60, 3, 1.0), 11).unwrap();
        let l = 10;
        let candidates = brute_force_root(&s.dataset, l);
        let best = candidates.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
        // pi is tiny so the root is almost surely the greedy choice.
        let params = TreeParams {
            pi: 1e-9,
            ..full_sample(l)
        };
        let tree = fit_tree(&s.dataset, &params, 1).unwrap();
        let (f, v) = tree.root_split().unwrap();
        let chosen = candidates.iter().find(|c| c.0 == f && (c.1 - v).abs() < 1e-12).unwrap();
        assert!((chosen.2 - best).abs() < 1e-9 * best.max(1.0));
    }

    #[test]
    fn small_node_is_a_single_leaf() {
        let ds = dataset(array![[0.0], [1.0], [2.0]], vec![1.0, 2.0, 3.0]);
        let tree = fit_tree(&ds, &full_sample(2), 0).unwrap();
        assert_eq!(tree.n_leaves(), 1);
        assert!(!tree.leaves()[0].degenerate);
    }

    #[test]
    fn constant_covariates_give_degenerate_leaf() {
        let cov = Array2::from_elem((10, 2), 0.3);
        let ds = dataset(cov, (0..10).map(f64::from).collect());
        let tree = fit_tree(&ds, &full_sample(2), 0).unwrap();
        assert_eq!(tree.n_leaves(), 1);
        assert!(tree.leaves()[0].degenerate);
    }

    #[test]
    fn empty_subsample_is_rejected() {
        let ds = dataset(array![[0.0], [1.0]], vec![0.0, 1.0]);
        let params = TreeParams {
            subsample_ratio: 0.1,
            ..TreeParams::with_min_leaf(1)
        };
        assert!(matches!(fit_tree(&ds, &params, 0), Err(Error::EmptySubsample(0))));
    }

    #[test]
    fn parameter_validation() {
        let bad = [
            TreeParams { pi: 0.0, ..TreeParams::default() },
            TreeParams { pi: 1.0, ..TreeParams::default() },
            TreeParams { min_leaf: 0, ..TreeParams::default() },
            TreeParams { alpha: Some(0.3), ..TreeParams::default() },
            TreeParams { subsample_ratio: 1.5, ..TreeParams::default() },
        ];
        for p in bad {
            assert!(p.validate().is_err(), "{p:?}");
        }
        assert!(TreeParams { alpha: Some(0.2), ..TreeParams::default() }.validate().is_ok());
    }

    #[test]
    fn assign_leaf_routing() {
        let ds = dataset(array![[0.0, 9.0], [0.0, 9.0], [1.0, 9.0], [1.0, 9.0]], vec![1.0, 1.0, 5.0, 5.0]);
        let tree = fit_tree(&ds, &full_sample(2), 0).unwrap();
        let left = tree.assign_leaf(&[0.2, 0.0]).unwrap();
        let right = tree.assign_leaf(&[0.9, 0.0]).unwrap();
        assert_ne!(left, right);
        assert_eq!(tree.assign_leaf(&[0.5, 0.0]).unwrap(), left);
        assert_eq!(tree.assign_leaf(&[0.7, 3.0]).unwrap(), tree.assign_leaf(&[0.7, 3.0]).unwrap());
        assert!(matches!(tree.assign_leaf(&[0.1]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn leaf_boxes() {
        let ds = dataset(array![[0.0, 9.0], [0.0, 9.0], [1.0, 9.0], [1.0, 9.0]], vec![1.0, 1.0, 5.0, 5.0]);
        let tree = fit_tree(&ds, &full_sample(2), 0).unwrap();
        let left = tree.assign_leaf(&[0.0, 0.0]).unwrap();
        let b = tree.leaf_box(left).unwrap();
        assert_eq!(b[0], Interval { lower: f64::NEG_INFINITY, upper: 0.5 });
        assert_eq!(b[1], Interval::UNBOUNDED);
        assert!(matches!(tree.leaf_box(9), Err(Error::UnknownLeaf(9))));

        let single = fit_tree(&ds, &full_sample(3), 0).unwrap();
        assert_eq!(single.leaf_box(0).unwrap(), vec![Interval::UNBOUNDED; 2]);
    }

    #[test]
    fn depth_bound_values() {
        assert_eq!(depth_bound(0.1).unwrap(), 22);
        assert_eq!(depth_bound(0.5).unwrap(), 1);
        assert_eq!(depth_bound(0.2).unwrap(), 8);
        assert!(depth_bound(0.0).is_err());
        assert!(depth_bound(1.0).is_err());
    }

    #[test]
    fn honest_halves_are_disjoint_and_cover() {
        let s = generate_synthetic(&SyntheticSpec::constant(200, 3, 1.0), 2).unwrap();
        let params = TreeParams {
            honesty: true,
            ..TreeParams::with_min_leaf(10)
        };
        let tree = fit_tree(&s.dataset, &params, 4).unwrap();
        assert_eq!(tree.sample_size(), 80);
        let mut est: Vec<usize> = tree.leaves().iter().flat_map(|l| l.members.clone()).collect();
        est.sort_unstable();
        assert_eq!(est.len(), 80);
        est.dedup();
        assert_eq!(est.len(), 80);
        for (id, leaf) in tree.leaves().iter().enumerate() {
            for &i in &leaf.members {
                assert_eq!(tree.assign_leaf(s.dataset.row(i)).unwrap(), id);
            }
            if !leaf.degenerate {
                let c = tree.leaf_fit_count(id);
                assert!((10..=19).contains(&c));
            }
        }
    }

    #[test]
    fn dump_lists_every_node() {
        let ds = dataset(array![[0.0], [0.0], [1.0], [1.0]], vec![1.0, 1.0, 5.0, 5.0]);
        let tree = fit_tree(&ds, &full_sample(2), 0).unwrap();
        let dump = tree.dump();
        assert!(dump.contains("split x0 <= 0.5 left=1 right=2"), "{dump}");
        assert_eq!(dump.lines().count(), 4);
        let json = serde_json::to_string(&tree).unwrap();
        let back: CausalTree = serde_json::from_str(&json).unwrap();
        assert_eq!(back, tree);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn structural_invariants(seed in 0u64..1000, l in 2usize..12, n in 20usize..160, d in 1usize..5) {
            let s = generate_synthetic(&SyntheticSpec::constant(n, d, 1.0), seed).unwrap();
            let tree = fit_tree(&s.dataset, &TreeParams::with_min_leaf(l), seed ^ 0xABCD).unwrap();
            let s_n = tree.sample_size();
            let mut seen = vec![0usize; s.dataset.n()];
            for (id, leaf) in tree.leaves().iter().enumerate() {
                let count = tree.leaf_fit_count(id);
                prop_assert_eq!(count, leaf.members.len());
                if !leaf.degenerate {
                    prop_assert!(count >= l && count <= 2 * l - 1);
                }
                let bx = tree.leaf_box(id).unwrap();
                for &i in &leaf.members {
                    seen[i] += 1;
                    let x = s.dataset.row(i);
                    prop_assert!(bx.iter().zip(x).all(|(b, &v)| b.contains(v)));
                    prop_assert_eq!(tree.assign_leaf(x).unwrap(), id);
                }
            }
            prop_assert_eq!(seen.iter().filter(|&&c| c == 1).count(), s_n);
            prop_assert!(seen.iter().all(|&c| c <= 1));
            for node in tree.nodes() {
                if let NodeKind::Split { left, right, .. } = node.kind {
                    prop_assert!(tree.nodes()[left].fit_count >= tree.min_child());
                    prop_assert!(tree.nodes()[right].fit_count >= tree.min_child());
                }
            }
            let alpha = tree.effective_alpha();
            if alpha < 1.0 {
                prop_assert!(tree.max_depth() <= depth_bound(alpha).unwrap());
            }
            prop_assert_eq!(fit_tree(&s.dataset, &TreeParams::with_min_leaf(l), seed ^ 0xABCD).unwrap(), tree);
        }
    }
}
