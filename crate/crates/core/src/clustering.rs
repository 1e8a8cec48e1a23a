//! Co-leaf counting over a forest and greedy LILI clustering.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::forest::Forest;
use crate::seed::rng_from_seed;
use crate::tolerance::lsli_threshold;

/// Symmetric `n x n` matrix of how many trees place each pair in one leaf.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoLeafCounts {
    n: usize,
    k: usize,
    counts: Vec<u16>,
}

impl CoLeafCounts {
    /// Counts from per-tree leaf assignments (`assignments[t][i]` is the leaf of row `i` in tree `t`).
    pub fn from_assignments(assignments: &[Vec<usize>], n: usize) -> Result<Self> {
        let k = assignments.len();
        if k > u16::MAX as usize {
            return Err(Error::InvalidParameter(format!("K = {k} exceeds {}", u16::MAX)));
        }
        if let Some(a) = assignments.iter().find(|a| a.len() != n) {
            return Err(Error::LengthMismatch(n, a.len()));
        }
        let buckets: Vec<Vec<Vec<u32>>> = assignments
            .par_iter()
            .map(|leaves| {
                let n_leaves = leaves.iter().max().map_or(0, |&m| m + 1);
                let mut b = vec![Vec::new(); n_leaves];
                for (i, &leaf) in leaves.iter().enumerate() {
                    b[leaf].push(i as u32);
                }
                b
            })
            .collect();
        let mut counts = vec![0u16; n * n];
        if n > 0 {
            counts.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
                for (leaves, b) in assignments.iter().zip(&buckets) {
                    for &j in &b[leaves[i]] {
                        row[j as usize] += 1;
                    }
                }
            });
        }
        Ok(Self { n, k, counts })
    }

    /// Builds counts from explicit off-diagonal entries; the diagonal is `k`
    /// and unspecified pairs are 0.
    pub fn from_pairs(n: usize, k: usize, pairs: &[(usize, usize, usize)]) -> Result<Self> {
        if k > u16::MAX as usize {
            return Err(Error::InvalidParameter(format!("K = {k} exceeds {}", u16::MAX)));
        }
        let mut counts = vec![0u16; n * n];
        for i in 0..n {
            counts[i * n + i] = k as u16;
        }
        for &(i, j, c) in pairs {
            if i >= n || j >= n || i == j || c > k {
                return Err(Error::InvalidParameter(format!("bad co-leaf entry ({i}, {j}, {c})")));
            }
            counts[i * n + j] = c as u16;
            counts[j * n + i] = c as u16;
        }
        Ok(Self { n, k, counts })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize) -> usize {
        self.counts[i * self.n + j] as usize
    }

    pub fn row(&self, i: usize) -> &[u16] {
        &self.counts[i * self.n..(i + 1) * self.n]
    }

    /// Fraction of unordered pairs whose co-leaf frequency lies strictly inside `(lo, hi)`.
    pub fn intermediate_fraction(&self, lo: f64, hi: f64) -> f64 {
        let pairs = self.n * self.n.saturating_sub(1) / 2;
        if pairs == 0 {
            return 0.0;
        }
        let k = self.k as f64;
        let hits: usize = (0..self.n)
            .map(|i| {
                self.row(i)[i + 1..]
                    .iter()
                    .filter(|&&c| {
                        let f = c as f64 / k;
                        f > lo && f < hi
                    })
                    .count()
            })
            .sum();
        hits as f64 / pairs as f64
    }

    /// One line per row, counts separated by commas.
    pub fn write_dense(&self, path: &Path) -> Result<()> {
        self.write_with(path, |w| {
            for i in 0..self.n {
                let line: Vec<String> = self.row(i).iter().map(u16::to_string).collect();
                writeln!(w, "{}", line.join(","))?;
            }
            Ok(())
        })
    }

    /// `i,j,count` for every nonzero pair with `i < j`.
    pub fn write_triplets(&self, path: &Path) -> Result<()> {
        self.write_with(path, |w| {
            writeln!(w, "i,j,count")?;
            for i in 0..self.n {
                for (j, &c) in self.row(i).iter().enumerate().skip(i + 1) {
                    if c > 0 {
                        writeln!(w, "{i},{j},{c}")?;
                    }
                }
            }
            Ok(())
        })
    }

    fn write_with(&self, path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
        let io = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        body(&mut w).and_then(|_| w.flush()).map_err(io)
    }
}

/// Co-leaf counts of every dataset row, routed through each tree by interval membership.
pub fn coleaf_counts(forest: &Forest, dataset: &Dataset) -> Result<CoLeafCounts> {
    if let Some(t) = forest.trees().first() {
        if t.d() != dataset.d() {
            return Err(Error::DimensionMismatch {
                expected: t.d(),
                found: dataset.d(),
            });
        }
    }
    CoLeafCounts::from_assignments(&forest.assign_all(dataset), dataset.n())
}

pub fn lili_member(counts: &CoLeafCounts, i: usize, j: usize, threshold: usize) -> bool {
    counts.get(i, j) >= threshold
}

pub fn lsli_member(counts: &CoLeafCounts, i: usize, j: usize, k: usize) -> bool {
    counts.get(i, j) >= lsli_threshold(k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraversalOrder {
    #[default]
    Row,
    SeededShuffle(u64),
}

impl TraversalOrder {
    pub fn permutation(&self, n: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..n).collect();
        if let TraversalOrder::SeededShuffle(seed) = self {
            order.shuffle(&mut rng_from_seed(*seed));
        }
        order
    }
}

/// Greedy clusters before pruning; the first member of each cluster is its seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawClustering {
    pub clusters: Vec<Vec<usize>>,
    pub threshold: usize,
    pub traversal_order: Vec<usize>,
}

/// Greedy extraction: each still-unassigned seed in `order` takes every
/// unassigned instance it is a LILI co-member with.
pub fn cluster(counts: &CoLeafCounts, threshold: usize, order: &[usize]) -> Result<RawClustering> {
    let n = counts.n();
    let mut seen = vec![false; n];
    if order.len() != n || !order.iter().all(|&i| i < n && !std::mem::replace(&mut seen[i], true)) {
        return Err(Error::InvalidParameter("traversal order is not a permutation".into()));
    }
    let mut assigned = vec![false; n];
    let mut clusters = Vec::new();
    for &x in order {
        if assigned[x] {
            continue;
        }
        assigned[x] = true;
        let mut members = vec![x];
        for (y, &c) in counts.row(x).iter().enumerate() {
            if !assigned[y] && c as usize >= threshold {
                assigned[y] = true;
                members.push(y);
            }
        }
        clusters.push(members);
    }
    Ok(RawClustering {
        clusters,
        threshold,
        traversal_order: order.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clustering {
    /// Retained clusters, each holding at least one treated and one control instance.
    pub clusters: Vec<Vec<usize>>,
    /// Members of pruned clusters, ascending.
    pub abandoned: Vec<usize>,
    pub threshold: usize,
    pub traversal_order: Vec<usize>,
}

impl Clustering {
    /// `n'`: instances in retained clusters.
    pub fn retained(&self) -> usize {
        self.clusters.iter().map(Vec::len).sum()
    }

    pub fn n(&self) -> usize {
        self.traversal_order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// Index of the retained cluster holding each instance.
    pub fn membership(&self) -> Vec<Option<usize>> {
        let mut of = vec![None; self.n()];
        for (c, members) in self.clusters.iter().enumerate() {
            for &i in members {
                of[i] = Some(c);
            }
        }
        of
    }
}

/// Moves clusters lacking a treated or a control member into the abandoned set.
/// An empty result is returned as is.
pub fn prune_single_group(raw: RawClustering, treatment: &[bool]) -> Clustering {
    let (clusters, dropped): (Vec<_>, Vec<_>) = raw.clusters.into_iter().partition(|c| {
        c.iter().any(|&i| treatment[i]) && c.iter().any(|&i| !treatment[i])
    });
    let mut abandoned: Vec<usize> = dropped.into_iter().flatten().collect();
    abandoned.sort_unstable();
    Clustering {
        clusters,
        abandoned,
        threshold: raw.threshold,
        traversal_order: raw.traversal_order,
    }
}

const EXACT_OVERLAP_LIMIT: usize = 2000;
const OVERLAP_SAMPLES: usize = 200_000;
const OVERLAP_SEED: u64 = 0x0DDB_A11;

/// Fraction of non-co-member pairs `(x, y)` sharing some co-member `w`, under
/// raw (not greedily disjoint) membership. Exact up to 2000 instances,
/// otherwise estimated from a fixed-seed sample of pairs.
pub fn overlap_rate(counts: &CoLeafCounts, threshold: usize) -> f64 {
    let n = counts.n();
    if n < 2 {
        return 0.0;
    }
    let words = n.div_ceil(64);
    let sets: Vec<Vec<u64>> = (0..n)
        .into_par_iter()
        .map(|x| {
            let mut bits = vec![0u64; words];
            for (y, &c) in counts.row(x).iter().enumerate() {
                if c as usize >= threshold {
                    bits[y / 64] |= 1 << (y % 64);
                }
            }
            bits
        })
        .collect();
    let shares = |x: usize, y: usize| sets[x].iter().zip(&sets[y]).any(|(a, b)| a & b != 0);

    let (hits, total) = if n <= EXACT_OVERLAP_LIMIT {
        (0..n)
            .into_par_iter()
            .map(|x| {
                (x + 1..n)
                    .filter(|&y| !lili_member(counts, x, y, threshold))
                    .fold((0usize, 0usize), |(h, t), y| (h + shares(x, y) as usize, t + 1))
            })
            .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
    } else {
        let mut rng = rng_from_seed(OVERLAP_SEED);
        let (mut h, mut t) = (0, 0);
        for _ in 0..OVERLAP_SAMPLES {
            let x = rng.random_range(0..n);
            let y = rng.random_range(0..n);
            if x != y && !lili_member(counts, x, y, threshold) {
                t += 1;
                h += shares(x, y) as usize;
            }
        }
        (h, t)
    };
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}
