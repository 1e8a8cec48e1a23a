//! Tolerance functions `f(K)`: how many of the `K` trees may separate two
//! instances before they stop being LILI co-members, plus a numeric
//! classifier for the asymptotic regime a tolerance function falls into.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ToleranceFn {
    /// `f(K) = sqrt(K)`.
    Sqrt,
    /// `f(K) = C1`.
    Constant(f64),
    /// `f(K) = K - C2`.
    LinearGap(f64),
    /// Explicit `(K, f(K))` pairs.
    Table(Vec<(usize, f64)>),
}

impl ToleranceFn {
    pub fn value(&self, k: usize) -> Result<f64> {
        let kf = k as f64;
        Ok(match self {
            ToleranceFn::Sqrt => kf.sqrt(),
            ToleranceFn::Constant(c) => *c,
            ToleranceFn::LinearGap(c) => kf - c,
            ToleranceFn::Table(rows) => rows
                .iter()
                .find(|(kk, _)| *kk == k)
                .map(|(_, v)| *v)
                .ok_or(Error::ToleranceUndefined(k))?,
        })
    }

    /// `K - f(K)`, computed without cancellation for the gap form.
    pub fn complement(&self, k: usize) -> Result<f64> {
        match self {
            ToleranceFn::LinearGap(c) => Ok(*c),
            _ => Ok(k as f64 - self.value(k)?),
        }
    }

    fn checked(&self, k: usize) -> Result<(f64, f64)> {
        let value = self.value(k)?;
        let complement = self.complement(k)?;
        if !(value > 0.0 && complement > 0.0 && value.is_finite() && complement.is_finite()) {
            return Err(Error::ToleranceOutOfRange { k, value });
        }
        Ok((value, complement))
    }
}

impl fmt::Display for ToleranceFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ToleranceFn::Sqrt => write!(f, "sqrt"),
            ToleranceFn::Constant(c) => write!(f, "const:{c}"),
            ToleranceFn::LinearGap(c) => write!(f, "gap:{c}"),
            ToleranceFn::Table(rows) => {
                let parts: Vec<String> = rows.iter().map(|(k, v)| format!("{k}={v}")).collect();
                write!(f, "table:{}", parts.join(";"))
            }
        }
    }
}

impl FromStr for ToleranceFn {
    type Err = Error;

    /// `sqrt`, `const:C`, `gap:C` or `table:K=f;K=f`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("unrecognised tolerance `{s}`"));
        let number = |v: &str| v.trim().parse::<f64>().map_err(|_| bad());
        let s = s.trim();
        if s == "sqrt" {
            return Ok(ToleranceFn::Sqrt);
        }
        let (kind, arg) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "const" => Ok(ToleranceFn::Constant(number(arg)?)),
            "gap" => Ok(ToleranceFn::LinearGap(number(arg)?)),
            "table" => arg
                .split(';')
                .map(|pair| {
                    let (k, v) = pair.split_once('=').ok_or_else(bad)?;
                    Ok((k.trim().parse::<usize>().map_err(|_| bad())?, number(v)?))
                })
                .collect::<Result<Vec<_>>>()
                .map(ToleranceFn::Table),
            _ => Err(bad()),
        }
    }
}

impl Serialize for ToleranceFn {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ToleranceFn {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Smallest integer strictly greater than `K - f(K)`: a pair is a LILI
/// co-member iff it shares a leaf in at least this many trees.
pub fn tolerance_threshold(k: usize, f: &ToleranceFn) -> Result<usize> {
    let (_, complement) = f.checked(k)?;
    Ok(complement.floor() as usize + 1)
}

/// Co-leaf count needed for LSLI membership under the square-root tolerance:
/// `K - m` where `m` is the largest integer not above `K - sqrt(K)`.
pub fn lsli_threshold(k: usize) -> usize {
    let kf = k as f64;
    k - (kf - kf.sqrt()).floor() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Small enough for co-membership to obey the zero-one law.
    Permitted,
    /// So large that clusters absorb every pair with positive co-leaf probability.
    Forbidden,
    /// Between the two boundaries; nothing can be concluded.
    Indeterminate,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Permitted => "permitted",
            Regime::Forbidden => "forbidden",
            Regime::Indeterminate => "indeterminate",
        })
    }
}

/// Allowed drift of a log-sequence per doubling of `K` that still counts as flat.
const SLOPE_TOL: f64 = 1e-3;
/// Elasticity with respect to `ln ln K` that separates a vanishing (or
/// diverging) sequence from one settling at a positive constant.
const ELASTICITY: f64 = 0.5;
const TAIL: usize = 3;

/// A positive sequence sampled on a `K` grid, stored as logarithms.
struct LogSeq<'a> {
    ks: &'a [f64],
    logs: Vec<f64>,
}

impl LogSeq<'_> {
    fn tail_slopes(&self) -> impl Iterator<Item = f64> + '_ {
        let start = self.ks.len().saturating_sub(TAIL);
        (start + 1..self.ks.len()).map(move |i| {
            (self.logs[i] - self.logs[i - 1]) / (self.ks[i] / self.ks[i - 1]).log2()
        })
    }

    fn nonincreasing(&self) -> bool {
        self.tail_slopes().all(|s| s <= SLOPE_TOL)
    }

    fn nondecreasing(&self) -> bool {
        self.tail_slopes().all(|s| s >= -SLOPE_TOL)
    }

    fn elasticity(&self) -> f64 {
        let m = self.ks.len();
        let lnln = |k: f64| k.ln().ln();
        (self.logs[m - 1] - self.logs[m - 2]) / (lnln(self.ks[m - 1]) - lnln(self.ks[m - 2]))
    }

    fn tends_to_zero(&self) -> bool {
        self.nonincreasing() && self.elasticity() < -ELASTICITY
    }

    fn tends_to_infinity(&self) -> bool {
        self.nondecreasing() && self.elasticity() > ELASTICITY
    }

    fn last(&self) -> f64 {
        self.logs[self.logs.len() - 1].exp()
    }
}

/// Classifies `f` by the trends of its limit conditions over `k_grid`, for a
/// pair whose single-tree co-leaf probability is `p`.
///
/// * forbidden when `(K - f) / ln K -> 0`, or when `p > 0.5` and
///   `K / ((K - f) 2^(K - f)) -> inf`;
/// * permitted when `f ln K / K` settles below `-ln p`, or when `p < 0.5` and
///   `f / K -> 0`;
/// * indeterminate otherwise, including grids with fewer than three usable
///   points (`K >= 3` with `0 < f(K) < K`).
pub fn regime_classify(f: &ToleranceFn, p: f64, k_grid: &[usize]) -> Regime {
    let points: Vec<(f64, f64, f64)> = k_grid
        .iter()
        .filter(|&&k| k >= 3)
        .filter_map(|&k| f.checked(k).ok().map(|(v, c)| (k as f64, v, c)))
        .collect();
    if points.len() < TAIL || !(p > 0.0 && p < 1.0) {
        return Regime::Indeterminate;
    }
    let ks: Vec<f64> = points.iter().map(|p| p.0).collect();
    let seq = |g: &dyn Fn(f64, f64, f64) -> f64| LogSeq {
        ks: &ks,
        logs: points.iter().map(|&(k, v, c)| g(k, v, c)).collect(),
    };

    let gap_over_log = seq(&|k, _, c| c.ln() - k.ln().ln());
    if gap_over_log.tends_to_zero() {
        return Regime::Forbidden;
    }
    if p > 0.5 {
        let inflation = seq(&|k, _, c| k.ln() - c.ln() - c * std::f64::consts::LN_2);
        if inflation.tends_to_infinity() {
            return Regime::Forbidden;
        }
    }
    let scaled = seq(&|k, v, _| v.ln() + k.ln().ln() - k.ln());
    if scaled.nonincreasing() && scaled.last() < -p.ln() {
        return Regime::Permitted;
    }
    if p < 0.5 && seq(&|k, v, _| v.ln() - k.ln()).tends_to_zero() {
        return Regime::Permitted;
    }
    Regime::Indeterminate
}

/// Powers of two from 8 to 2^20.
pub fn default_regime_grid() -> Vec<usize> {
    (3..=20).map(|e| 1usize << e).collect()
}
