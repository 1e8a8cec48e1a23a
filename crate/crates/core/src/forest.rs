//! Forests of independently fitted causal trees and the plain causal-forest
//! estimator: per-tree leaf contrasts averaged over trees, then over instances.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::seed::derive_seed;
use crate::tree::{fit_tree, CausalTree, TreeParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    trees: Vec<CausalTree>,
    params: TreeParams,
    master_seed: u64,
}

/// Fits `k` trees, tree `i` seeded with `derive_seed(master_seed, i)`.
pub fn fit_forest(dataset: &Dataset, k: usize, params: &TreeParams, master_seed: u64) -> Result<Forest> {
    if k == 0 {
        return Err(Error::InvalidParameter("a forest needs at least one tree".into()));
    }
    params.validate()?;
    let trees = (0..k as u64)
        .into_par_iter()
        .map(|i| fit_tree(dataset, params, derive_seed(master_seed, i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Forest {
        trees,
        params: params.clone(),
        master_seed,
    })
}

impl Forest {
    /// Assembles a forest from already fitted trees.
    pub fn from_trees(trees: Vec<CausalTree>, params: TreeParams, master_seed: u64) -> Result<Self> {
        let Some(first) = trees.first() else {
            return Err(Error::InvalidParameter("a forest needs at least one tree".into()));
        };
        let d = first.d();
        if let Some(t) = trees.iter().find(|t| t.d() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: t.d(),
            });
        }
        Ok(Self {
            trees,
            params,
            master_seed,
        })
    }

    pub fn k(&self) -> usize {
        self.trees.len()
    }

    pub fn trees(&self) -> &[CausalTree] {
        &self.trees
    }

    pub fn params(&self) -> &TreeParams {
        &self.params
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Leaf id of every dataset row, one vector per tree.
    pub fn assign_all(&self, dataset: &Dataset) -> Vec<Vec<usize>> {
        self.trees.par_iter().map(|t| t.assign_all(dataset)).collect()
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct GroupSums {
    treated_sum: f64,
    treated: usize,
    control_sum: f64,
    control: usize,
}

impl GroupSums {
    fn add(&mut self, treated: bool, y: f64) {
        if treated {
            self.treated_sum += y;
            self.treated += 1;
        } else {
            self.control_sum += y;
            self.control += 1;
        }
    }

    fn contrast(&self) -> Option<f64> {
        (self.treated > 0 && self.control > 0)
            .then(|| self.treated_sum / self.treated as f64 - self.control_sum / self.control as f64)
    }
}

/// Treated-minus-control mean outcome per leaf, over all dataset rows routed there.
fn leaf_contrasts(tree: &CausalTree, leaves: &[usize], dataset: &Dataset) -> Vec<Option<f64>> {
    let mut sums = vec![GroupSums::default(); tree.n_leaves()];
    for (i, &leaf) in leaves.iter().enumerate() {
        sums[leaf].add(dataset.is_treated(i), dataset.outcome()[i]);
    }
    sums.iter().map(GroupSums::contrast).collect()
}

/// Effect predicted for `x` by one tree: the contrast in the leaf `x` falls
/// into, or `None` when that leaf lacks a treated or a control instance.
pub fn tree_ite(forest: &Forest, tree_index: usize, x: &[f64], dataset: &Dataset) -> Result<Option<f64>> {
    let tree = forest.trees.get(tree_index).ok_or_else(|| {
        Error::InvalidParameter(format!("tree index {tree_index} out of range for K = {}", forest.k()))
    })?;
    let target = tree.assign_leaf(x)?;
    let mut sums = GroupSums::default();
    for i in 0..dataset.n() {
        if tree.assign_leaf(dataset.row(i))? == target {
            sums.add(dataset.is_treated(i), dataset.outcome()[i]);
        }
    }
    Ok(sums.contrast())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestEstimate {
    pub ate: f64,
    /// Mean of the defined per-tree effects; `None` when no tree defines one.
    pub per_instance_ite: Vec<Option<f64>>,
}

/// Per-instance effects averaged over the trees that define them, and their
/// mean over instances with at least one defined tree.
pub fn forest_estimate(forest: &Forest, dataset: &Dataset) -> Result<ForestEstimate> {
    let per_tree: Vec<Vec<Option<f64>>> = forest
        .trees
        .par_iter()
        .map(|tree| {
            let leaves = tree.assign_all(dataset);
            let contrasts = leaf_contrasts(tree, &leaves, dataset);
            leaves.iter().map(|&l| contrasts[l]).collect()
        })
        .collect();
    let n = dataset.n();
    let mut sum = vec![0.0; n];
    let mut count = vec![0usize; n];
    for effects in &per_tree {
        for (i, e) in effects.iter().enumerate() {
            if let Some(v) = e {
                sum[i] += v;
                count[i] += 1;
            }
        }
    }
    let per_instance_ite: Vec<Option<f64>> = sum
        .iter()
        .zip(&count)
        .map(|(&s, &c)| (c > 0).then(|| s / c as f64))
        .collect();
    let defined: Vec<f64> = per_instance_ite.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(Error::NoDefinedEffect);
    }
    let ate = defined.iter().sum::<f64>() / defined.len() as f64;
    Ok(ForestEstimate { ate, per_instance_ite })
}

pub fn forest_ate(forest: &Forest, dataset: &Dataset) -> Result<f64> {
    forest_estimate(forest, dataset).map(|e| e.ate)
}
