//! Effect estimates from a LILI clustering: per-cluster contrasts, their
//! size-weighted average, instance-level effects and evaluation losses.

use serde::{Deserialize, Serialize};

use crate::clustering::Clustering;
use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    All,
    Treated,
    Control,
}

impl Group {
    fn admits(self, treated: bool) -> bool {
        match self {
            Group::All => true,
            Group::Treated => treated,
            Group::Control => !treated,
        }
    }
}

fn group_mean(cluster: &[usize], dataset: &Dataset, treated: bool) -> Option<f64> {
    let (sum, count) = cluster
        .iter()
        .filter(|&&i| dataset.is_treated(i) == treated)
        .fold((0.0, 0usize), |(s, c), &i| (s + dataset.outcome()[i], c + 1));
    (count > 0).then(|| sum / count as f64)
}

/// Mean treated outcome minus mean control outcome within `cluster`.
pub fn cluster_ate(cluster: &[usize], dataset: &Dataset) -> Result<f64> {
    match (group_mean(cluster, dataset, true), group_mean(cluster, dataset, false)) {
        (Some(t), Some(c)) => Ok(t - c),
        _ => Err(Error::MissingGroup),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub id: usize,
    pub size: usize,
    pub treated: usize,
    pub control: usize,
    pub cate: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub overall_ate: f64,
    pub per_cluster: Vec<ClusterSummary>,
    pub per_instance_ite: Vec<f64>,
    /// `n' / n`.
    pub available_fraction: f64,
    pub cluster_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l1_ate_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pehe: Option<f64>,
}

impl EstimateReport {
    /// Fills the losses when the dataset records counterfactual outcomes.
    pub fn attach_losses(&mut self, dataset: &Dataset) -> Result<()> {
        if dataset.counterfactual().is_none() {
            return Ok(());
        }
        let (y1, y0) = dataset.potential_outcomes()?;
        let truth = y1.iter().zip(&y0).map(|(a, b)| a - b).sum::<f64>() / y1.len() as f64;
        self.l1_ate_loss = Some(l1_ate_loss(self.overall_ate, truth));
        self.pehe = Some(pehe(&self.per_instance_ite, &y1, &y0)?);
        Ok(())
    }
}

/// Instance effects: a treated instance is contrasted with its cluster's
/// control mean, a control instance with the treated mean; abandoned
/// instances receive `overall_ate`.
pub fn instance_ite(clustering: &Clustering, dataset: &Dataset, overall_ate: f64) -> Vec<f64> {
    let mut ite = vec![overall_ate; dataset.n()];
    let y = dataset.outcome();
    for c in &clustering.clusters {
        let treated = group_mean(c, dataset, true);
        let control = group_mean(c, dataset, false);
        for &i in c {
            let v = if dataset.is_treated(i) {
                control.map(|m| y[i] - m)
            } else {
                treated.map(|m| m - y[i])
            };
            if let Some(v) = v {
                ite[i] = v;
            }
        }
    }
    ite
}

/// Size-weighted mean of the cluster effects, weights `|c| / n'`.
pub fn overall_ate(clustering: &Clustering, dataset: &Dataset) -> Result<(f64, EstimateReport)> {
    if clustering.is_empty() {
        return Err(Error::NoRetainedClusters);
    }
    let retained = clustering.retained();
    let per_cluster = clustering
        .clusters
        .iter()
        .enumerate()
        .map(|(id, c)| {
            let treated = c.iter().filter(|&&i| dataset.is_treated(i)).count();
            Ok(ClusterSummary {
                id,
                size: c.len(),
                treated,
                control: c.len() - treated,
                cate: cluster_ate(c, dataset)?,
                weight: c.len() as f64 / retained as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ate = per_cluster.iter().map(|c| c.cate * c.weight).sum();
    let report = EstimateReport {
        overall_ate: ate,
        per_instance_ite: instance_ite(clustering, dataset, ate),
        available_fraction: retained as f64 / dataset.n() as f64,
        cluster_count: per_cluster.len(),
        per_cluster,
        l1_ate_loss: None,
        pehe: None,
    };
    Ok((ate, report))
}

/// Empirical CDF of the outcomes in `cluster` at `y`.
pub fn estimated_cdf(cluster: &[usize], dataset: &Dataset, y: f64) -> Result<f64> {
    group_cdf(cluster, dataset, Group::All, y)
}

/// Empirical CDF restricted to one treatment group of `cluster`.
pub fn group_cdf(cluster: &[usize], dataset: &Dataset, group: Group, y: f64) -> Result<f64> {
    let (below, total) = cluster
        .iter()
        .filter(|&&i| group.admits(dataset.is_treated(i)))
        .fold((0usize, 0usize), |(b, t), &i| (b + (dataset.outcome()[i] <= y) as usize, t + 1));
    if total == 0 {
        return Err(Error::EmptyCluster);
    }
    Ok(below as f64 / total as f64)
}

pub fn l1_ate_loss(estimated: f64, truth: f64) -> f64 {
    (estimated - truth).abs()
}

/// Mean squared error of `ite_est` against `y1 - y0`.
pub fn pehe(ite_est: &[f64], y1: &[f64], y0: &[f64]) -> Result<f64> {
    if y1.len() != ite_est.len() {
        return Err(Error::LengthMismatch(ite_est.len(), y1.len()));
    }
    if y0.len() != ite_est.len() {
        return Err(Error::LengthMismatch(ite_est.len(), y0.len()));
    }
    if ite_est.is_empty() {
        return Ok(0.0);
    }
    let sse: f64 = ite_est
        .iter()
        .zip(y1.iter().zip(y0))
        .map(|(e, (a, b))| (a - b - e).powi(2))
        .sum();
    Ok(sse / ite_est.len() as f64)
}

/// L1 diameter of the bounding box of the members' covariates.
pub fn cluster_diameter(cluster: &[usize], dataset: &Dataset) -> Result<f64> {
    let (&first, rest) = cluster.split_first().ok_or(Error::EmptyCluster)?;
    let mut lo = dataset.row(first).to_vec();
    let mut hi = lo.clone();
    for &i in rest {
        for (j, &v) in dataset.row(i).iter().enumerate() {
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }
    Ok(hi.iter().zip(&lo).map(|(h, l)| h - l).sum())
}
