//! Grid search over minimum leaf size `l` and forest size `K`.

use std::fmt;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{cluster, coleaf_counts, prune_single_group, TraversalOrder};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimate::{l1_ate_loss, overall_ate};
use crate::forest::fit_forest;
use crate::tolerance::{tolerance_threshold, ToleranceFn};
use crate::tree::TreeParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepStatus {
    Ok,
    /// `2l - 1` exceeds the subsample size.
    Infeasible,
    /// Every cluster was pruned.
    Empty,
    /// The tolerance is out of range at this `K`, or fitting failed.
    Error,
}

impl fmt::Display for SweepStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepStatus::Ok => "ok",
            SweepStatus::Infeasible => "infeasible",
            SweepStatus::Empty => "empty",
            SweepStatus::Error => "error",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub l: usize,
    pub k: usize,
    pub tolerance: ToleranceFn,
    pub status: SweepStatus,
    pub available_fraction: f64,
    pub cluster_count: usize,
    pub estimated_ate: Option<f64>,
    pub l1_loss: Option<f64>,
    pub wall_time: f64,
}

/// Sweeps with default tree parameters and row-order traversal.
pub fn sweep(dataset: &Dataset, l_grid: &[usize], k_grid: &[usize], f: &ToleranceFn, master_seed: u64) -> Result<Vec<SweepRecord>> {
    sweep_with(dataset, l_grid, k_grid, f, master_seed, &TreeParams::default(), TraversalOrder::Row)
}

/// One record per `(l, K)` in grid order (`l` outer). Every point refits its
/// forest from `master_seed`, with `alpha` pinned to `l / s_n`; only `pi`,
/// the subsample ratio and honesty are taken from `base`.
pub fn sweep_with(
    dataset: &Dataset,
    l_grid: &[usize],
    k_grid: &[usize],
    f: &ToleranceFn,
    master_seed: u64,
    base: &TreeParams,
    order: TraversalOrder,
) -> Result<Vec<SweepRecord>> {
    if l_grid.is_empty() || k_grid.is_empty() {
        return Err(Error::InvalidParameter("sweep grids must be nonempty".into()));
    }
    let truth = dataset
        .counterfactual()
        .map(|_| dataset.potential_outcomes())
        .transpose()?
        .map(|(y1, y0)| y1.iter().zip(&y0).map(|(a, b)| a - b).sum::<f64>() / y1.len() as f64);
    let points: Vec<(usize, usize)> = l_grid.iter().flat_map(|&l| k_grid.iter().map(move |&k| (l, k))).collect();
    Ok(points
        .par_iter()
        .map(|&(l, k)| {
            let params = TreeParams {
                alpha: None,
                min_leaf: l,
                ..base.clone()
            };
            evaluate(dataset, &params, k, f, master_seed, order, truth)
        })
        .collect())
}

fn evaluate(
    dataset: &Dataset,
    params: &TreeParams,
    k: usize,
    f: &ToleranceFn,
    seed: u64,
    order: TraversalOrder,
    truth: Option<f64>,
) -> SweepRecord {
    let start = Instant::now();
    let mut record = SweepRecord {
        l: params.min_leaf,
        k,
        tolerance: f.clone(),
        status: SweepStatus::Ok,
        available_fraction: 0.0,
        cluster_count: 0,
        estimated_ate: None,
        l1_loss: None,
        wall_time: 0.0,
    };
    if params.min_leaf == 0 || 2 * params.min_leaf - 1 > params.subsample_size(dataset.n()) {
        record.status = SweepStatus::Infeasible;
        return record;
    }
    let outcome = (|| {
        let threshold = tolerance_threshold(k, f)?;
        let forest = fit_forest(dataset, k, params, seed)?;
        let counts = coleaf_counts(&forest, dataset)?;
        let raw = cluster(&counts, threshold, &order.permutation(dataset.n()))?;
        let clustering = prune_single_group(raw, dataset.treatment());
        if clustering.is_empty() {
            return Ok(None);
        }
        overall_ate(&clustering, dataset).map(Some)
    })();
    match outcome {
        Ok(Some((ate, report))) => {
            record.available_fraction = report.available_fraction;
            record.cluster_count = report.cluster_count;
            record.estimated_ate = Some(ate);
            record.l1_loss = truth.map(|t| l1_ate_loss(ate, t));
        }
        Ok(None) => record.status = SweepStatus::Empty,
        Err(_) => record.status = SweepStatus::Error,
    }
    record.wall_time = start.elapsed().as_secs_f64();
    record
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub l: usize,
    pub k: usize,
    pub available_fraction: f64,
    pub cluster_count: usize,
    /// No successful record reached `min_available`; the most available one was taken instead.
    pub warning: bool,
}

/// Among successful records with `available_fraction >= min_available`, the
/// one with the most clusters, ties to smaller `K` then larger `l`. Without a
/// qualifying record, the one with the largest available fraction, flagged.
pub fn select(records: &[SweepRecord], min_available: f64) -> Option<Selection> {
    let ok = || records.iter().filter(|r| r.status == SweepStatus::Ok);
    let by_rule = |a: &&SweepRecord, b: &&SweepRecord| {
        a.cluster_count
            .cmp(&b.cluster_count)
            .then(b.k.cmp(&a.k))
            .then(a.l.cmp(&b.l))
            .then(a.available_fraction.total_cmp(&b.available_fraction))
            .then_with(|| b.tolerance.to_string().cmp(&a.tolerance.to_string()))
    };
    let chosen = ok().filter(|r| r.available_fraction >= min_available).max_by(by_rule);
    let warning = chosen.is_none();
    let chosen = chosen.or_else(|| {
        ok().max_by(|a, b| a.available_fraction.total_cmp(&b.available_fraction).then_with(|| by_rule(a, b)))
    })?;
    Some(Selection {
        l: chosen.l,
        k: chosen.k,
        available_fraction: chosen.available_fraction,
        cluster_count: chosen.cluster_count,
        warning,
    })
}

fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties; `None` when either
/// side is constant or the lengths differ.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let mean = (x.len() as f64 + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mean) * (b - mean);
        sxx += (a - mean).powi(2);
        syy += (b - mean).powi(2);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

/// Writes one CSV row per record; `wall_time` only when `timing` is set, so
/// that untimed output is reproducible byte for byte.
pub fn write_sweep_csv(records: &[SweepRecord], path: &Path, timing: bool) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["l", "k", "tolerance", "status", "available_fraction", "cluster_count", "estimated_ate", "l1_loss"];
    if timing {
        header.push("wall_time");
    }
    w.write_record(&header)?;
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for r in records {
        let mut row = vec![
            r.l.to_string(),
            r.k.to_string(),
            r.tolerance.to_string(),
            r.status.to_string(),
            r.available_fraction.to_string(),
            r.cluster_count.to_string(),
            opt(r.estimated_ate),
            opt(r.l1_loss),
        ];
        if timing {
            row.push(r.wall_time.to_string());
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads records back from [`write_sweep_csv`] output, with or without timing.
pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let bad = |row: usize, column: &str, value: &str| Error::NonNumeric {
        row,
        column: column.to_string(),
        value: value.to_string(),
    };
    let mut records = Vec::new();
    for (row, result) in reader.records().enumerate() {
        let rec = result?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize, name: &str| field(i).parse::<f64>().map_err(|_| bad(row, name, field(i)));
        let count = |i: usize, name: &str| field(i).parse::<usize>().map_err(|_| bad(row, name, field(i)));
        let opt = |i: usize, name: &str| (!field(i).is_empty()).then(|| num(i, name)).transpose();
        let status = match field(3) {
            "ok" => SweepStatus::Ok,
            "infeasible" => SweepStatus::Infeasible,
            "empty" => SweepStatus::Empty,
            "error" => SweepStatus::Error,
            other => return Err(bad(row, "status", other)),
        };
        records.push(SweepRecord {
            l: count(0, "l")?,
            k: count(1, "k")?,
            tolerance: field(2).parse()?,
            status,
            available_fraction: num(4, "available_fraction")?,
            cluster_count: count(5, "cluster_count")?,
            estimated_ate: opt(6, "estimated_ate")?,
            l1_loss: opt(7, "l1_loss")?,
            wall_time: opt(8, "wall_time")?.unwrap_or(0.0),
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticSpec};
    use proptest::prelude::*;

    fn record(l: usize, k: usize, avail: f64, count: usize) -> SweepRecord {
        SweepRecord {
            l,
            k,
            tolerance: ToleranceFn::Sqrt,
            status: SweepStatus::Ok,
            available_fraction: avail,
            cluster_count: count,
            estimated_ate: Some(0.0),
            l1_loss: None,
            wall_time: 0.0,
        }
    }

    fn narrative() -> Vec<SweepRecord> {
        vec![
            record(30, 50, 0.90, 60),
            record(25, 50, 0.82, 100),
            record(20, 50, 0.80, 150),
            record(15, 50, 0.50, 208),
        ]
    }

    #[test]
    fn narrative_selects_twenty() {
        let s = select(&narrative(), 0.8).unwrap();
        assert_eq!((s.l, s.k, s.warning), (20, 50, false));
        assert_eq!(select(&narrative(), 0.9).unwrap().l, 30);
    }

    #[test]
    fn fallback_and_ties() {
        let s = select(&[record(20, 50, 0.5, 10), record(30, 50, 0.7, 3)], 0.8).unwrap();
        assert_eq!((s.l, s.warning), (30, true));
        let s = select(&[record(20, 70, 0.9, 10), record(20, 50, 0.9, 10)], 0.8).unwrap();
        assert_eq!(s.k, 50);
        let s = select(&[record(20, 50, 0.9, 10), record(25, 50, 0.9, 10)], 0.8).unwrap();
        assert_eq!(s.l, 25);
        let mut failed = record(10, 50, 1.0, 99);
        failed.status = SweepStatus::Empty;
        assert_eq!(select(&[failed.clone(), record(20, 50, 0.85, 1)], 0.8).unwrap().l, 20);
        assert_eq!(select(&[failed], 0.8), None);
    }

    #[test]
    fn spearman_values() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]), None);
        // Ties: ranks (1.5, 1.5, 3) against (1, 2, 3).
        let r = spearman(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((r - 0.866_025_403_784_438_6).abs() < 1e-12);
    }

    #[test]
    fn single_point_and_infeasible() {
        let s = generate_synthetic(&SyntheticSpec::constant(400, 3, 2.0), 1).unwrap();
        let records = sweep(&s.dataset, &[20, 400], &[10], &ToleranceFn::Sqrt, 3).unwrap();
        assert_eq!(records.len(), 2);
        let ok = &records[0];
        assert_eq!((ok.l, ok.k, ok.status), (20, 10, SweepStatus::Ok));
        assert!(ok.estimated_ate.is_some() && ok.l1_loss.is_some() && ok.cluster_count > 0);
        assert!(ok.available_fraction > 0.0 && ok.available_fraction <= 1.0);
        assert_eq!(records[1].status, SweepStatus::Infeasible);

        let bad = sweep(&s.dataset, &[20], &[10], &ToleranceFn::LinearGap(10.0), 3).unwrap();
        assert_eq!(bad[0].status, SweepStatus::Error);

        let again = sweep(&s.dataset, &[20, 400], &[10], &ToleranceFn::Sqrt, 3).unwrap();
        let strip = |r: &[SweepRecord]| r.iter().map(|r| SweepRecord { wall_time: 0.0, ..r.clone() }).collect::<Vec<_>>();
        assert_eq!(strip(&records), strip(&again));

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        write_sweep_csv(&records, &path, false).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(2).unwrap().starts_with("400,10,sqrt,infeasible,0,0,,"));
        assert_eq!(strip(&read_sweep_csv(&path).unwrap()), strip(&records));
        write_sweep_csv(&records, &path, true).unwrap();
        assert_eq!(read_sweep_csv(&path).unwrap()[0].wall_time, records[0].wall_time);
    }

    proptest! {
        #[test]
        fn select_ignores_order(
            raw in proptest::collection::vec((1usize..5, 1usize..4, 0.0f64..1.0, 0usize..6), 1..12),
            seed in any::<u64>(),
        ) {
            let records: Vec<SweepRecord> = raw.iter().map(|&(l, k, a, c)| record(l * 10, k * 25, a, c)).collect();
            let mut shuffled = records.clone();
            use rand::seq::SliceRandom;
            shuffled.shuffle(&mut crate::seed::rng_from_seed(seed));
            prop_assert_eq!(select(&records, 0.8), select(&shuffled, 0.8));
        }
    }
}
