//! Datasets: CSV ingestion, max-min preprocessing, twin pairing, ground-truth
//! effects and a synthetic generator with known potential outcomes.

use std::collections::HashMap;
use std::fs::File;
use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Continuous,
    Categorical,
}

/// Covariates, binary treatment, observed outcome and (optionally) the
/// counterfactual outcome of every unit. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    covariates: Array2<f64>,
    treatment: Vec<bool>,
    outcome: Vec<f64>,
    counterfactual: Option<Vec<f64>>,
    feature_kinds: Vec<FeatureKind>,
    feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        covariates: Array2<f64>,
        treatment: Vec<bool>,
        outcome: Vec<f64>,
        counterfactual: Option<Vec<f64>>,
        feature_kinds: Vec<FeatureKind>,
    ) -> Result<Self> {
        let d = covariates.ncols();
        let names = (0..d).map(|j| format!("x{j}")).collect();
        Self::with_names(covariates, treatment, outcome, counterfactual, feature_kinds, names)
    }

    pub fn with_names(
        covariates: Array2<f64>,
        treatment: Vec<bool>,
        outcome: Vec<f64>,
        counterfactual: Option<Vec<f64>>,
        feature_kinds: Vec<FeatureKind>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n = covariates.nrows();
        let d = covariates.ncols();
        if n == 0 || d == 0 {
            return Err(Error::InvalidDataset(format!(
                "need at least one row and one covariate, got {n}x{d}"
            )));
        }
        if treatment.len() != n || outcome.len() != n {
            return Err(Error::InvalidDataset(format!(
                "{n} covariate rows but {} treatments and {} outcomes",
                treatment.len(),
                outcome.len()
            )));
        }
        if let Some(cf) = &counterfactual {
            if cf.len() != n {
                return Err(Error::InvalidDataset(format!(
                    "{n} rows but {} counterfactual outcomes",
                    cf.len()
                )));
            }
        }
        if feature_kinds.len() != d || feature_names.len() != d {
            return Err(Error::InvalidDataset(format!(
                "{d} covariates but {} kinds and {} names",
                feature_kinds.len(),
                feature_names.len()
            )));
        }
        let all_finite = covariates.iter().all(|v| v.is_finite())
            && outcome.iter().all(|v| v.is_finite())
            && counterfactual
                .as_ref()
                .is_none_or(|cf| cf.iter().all(|v| v.is_finite()));
        if !all_finite {
            return Err(Error::InvalidDataset("non-finite value".into()));
        }
        // Rows must be contiguous for `row`.
        let covariates = covariates.as_standard_layout().into_owned();
        Ok(Self {
            covariates,
            treatment,
            outcome,
            counterfactual,
            feature_kinds,
            feature_names,
        })
    }

    pub fn n(&self) -> usize {
        self.covariates.nrows()
    }

    pub fn d(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn covariates(&self) -> &Array2<f64> {
        &self.covariates
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.covariates
            .row(i)
            .to_slice()
            .expect("covariates are stored in standard layout")
    }

    pub fn treatment(&self) -> &[bool] {
        &self.treatment
    }

    pub fn is_treated(&self, i: usize) -> bool {
        self.treatment[i]
    }

    pub fn outcome(&self) -> &[f64] {
        &self.outcome
    }

    pub fn counterfactual(&self) -> Option<&[f64]> {
        self.counterfactual.as_deref()
    }

    pub fn feature_kinds(&self) -> &[FeatureKind] {
        &self.feature_kinds
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn with_feature_kinds(mut self, kinds: Vec<FeatureKind>) -> Result<Self> {
        if kinds.len() != self.d() {
            return Err(Error::DimensionMismatch {
                expected: self.d(),
                found: kinds.len(),
            });
        }
        self.feature_kinds = kinds;
        Ok(self)
    }

    /// Potential outcomes `(y1, y0)` per unit, when counterfactuals are known.
    pub fn potential_outcomes(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let cf = self.counterfactual().ok_or(Error::MissingCounterfactual)?;
        let mut y1 = Vec::with_capacity(self.n());
        let mut y0 = Vec::with_capacity(self.n());
        for i in 0..self.n() {
            if self.treatment[i] {
                y1.push(self.outcome[i]);
                y0.push(cf[i]);
            } else {
                y1.push(cf[i]);
                y0.push(self.outcome[i]);
            }
        }
        Ok((y1, y0))
    }

    /// Writes `t,y[,ycf],<features>` with a header row.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut w = csv::Writer::from_writer(file);
        let mut header = vec!["t".to_string(), "y".to_string()];
        if self.counterfactual.is_some() {
            header.push("ycf".to_string());
        }
        header.extend(self.feature_names.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.n() {
            let mut rec = vec![
                if self.treatment[i] { "1" } else { "0" }.to_string(),
                self.outcome[i].to_string(),
            ];
            if let Some(cf) = &self.counterfactual {
                rec.push(cf[i].to_string());
            }
            rec.extend(self.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(())
    }
}

/// Column roles for [`load_csv`].
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    pub treatment: String,
    pub outcome: String,
    /// Used when the column exists; a missing counterfactual column is not an error.
    pub counterfactual: Option<String>,
    /// Columns ignored entirely (e.g. noiseless means shipped with a benchmark).
    pub drop: Vec<String>,
    /// Per-column kind overrides. Unlisted columns are continuous when every
    /// value parses as a number, categorical otherwise.
    pub kinds: HashMap<String, FeatureKind>,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            treatment: "t".into(),
            outcome: "y".into(),
            counterfactual: Some("ycf".into()),
            drop: Vec::new(),
            kinds: HashMap::new(),
        }
    }
}

fn parse_number(raw: &str) -> Option<f64> {
    raw.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads a headed CSV file. Row order is preserved; categorical columns are
/// label-encoded in first-appearance order.
pub fn load_csv(path: &Path, schema: &Schema) -> Result<Dataset> {
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let find = |name: &str| headers.iter().position(|h| h == name);

    let t_col = find(&schema.treatment).ok_or_else(|| Error::MissingColumn(schema.treatment.clone()))?;
    let y_col = find(&schema.outcome).ok_or_else(|| Error::MissingColumn(schema.outcome.clone()))?;
    let cf_col = schema.counterfactual.as_deref().and_then(find);
    for name in &schema.drop {
        if find(name).is_none() {
            return Err(Error::MissingColumn(name.clone()));
        }
    }
    let cov_cols: Vec<usize> = (0..headers.len())
        .filter(|&j| j != t_col && j != y_col && Some(j) != cf_col)
        .filter(|&j| !schema.drop.contains(&headers[j]))
        .collect();

    let mut treatment = Vec::new();
    let mut outcome = Vec::new();
    let mut counterfactual = cf_col.map(|_| Vec::new());
    let mut raw_cov: Vec<Vec<String>> = vec![Vec::new(); cov_cols.len()];

    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::RaggedRow {
                row,
                expected: headers.len(),
                found: record.len(),
            });
        }
        let field = |j: usize| -> Result<&str> {
            let v = &record[j];
            if v.is_empty() {
                Err(Error::MissingValue {
                    row,
                    column: headers[j].clone(),
                })
            } else {
                Ok(v)
            }
        };
        let t_raw = field(t_col)?;
        treatment.push(match parse_number(t_raw) {
            Some(v) if v == 0.0 => false,
            Some(v) if v == 1.0 => true,
            _ => {
                return Err(Error::NonBinaryTreatment {
                    row,
                    value: t_raw.to_string(),
                })
            }
        });
        let numeric = |j: usize| -> Result<f64> {
            let raw = field(j)?;
            parse_number(raw).ok_or_else(|| Error::NonNumeric {
                row,
                column: headers[j].clone(),
                value: raw.to_string(),
            })
        };
        outcome.push(numeric(y_col)?);
        if let (Some(j), Some(cf)) = (cf_col, counterfactual.as_mut()) {
            cf.push(numeric(j)?);
        }
        for (slot, &j) in raw_cov.iter_mut().zip(&cov_cols) {
            slot.push(field(j)?.to_string());
        }
    }
    let n = treatment.len();
    let d = cov_cols.len();
    let mut covariates = Array2::zeros((n, d));
    let mut kinds = Vec::with_capacity(d);
    for (c, (raw, &j)) in raw_cov.iter().zip(&cov_cols).enumerate() {
        let declared = schema.kinds.get(&headers[j]).copied();
        let parsed: Option<Vec<f64>> = raw.iter().map(|s| parse_number(s)).collect();
        let (kind, values) = match (declared, parsed) {
            (Some(FeatureKind::Continuous), Some(v)) | (None, Some(v)) => (FeatureKind::Continuous, v),
            (Some(FeatureKind::Continuous), None) => {
                let (row, value) = raw
                    .iter()
                    .enumerate()
                    .find(|(_, s)| parse_number(s).is_none())
                    .expect("some value failed to parse");
                return Err(Error::NonNumeric {
                    row,
                    column: headers[j].clone(),
                    value: value.clone(),
                });
            }
            (Some(FeatureKind::Categorical), _) | (None, None) => {
                (FeatureKind::Categorical, label_encode(raw.iter().map(String::as_str)))
            }
        };
        kinds.push(kind);
        for (i, v) in values.into_iter().enumerate() {
            covariates[[i, c]] = v;
        }
    }
    let names = cov_cols.iter().map(|&j| headers[j].clone()).collect();
    Dataset::with_names(covariates, treatment, outcome, counterfactual, kinds, names)
}

/// Integer codes 0..C-1 in order of first appearance.
fn label_encode<'a, T, I>(values: I) -> Vec<f64>
where
    T: PartialEq + 'a,
    I: IntoIterator<Item = T>,
{
    let mut seen: Vec<T> = Vec::new();
    values
        .into_iter()
        .map(|v| match seen.iter().position(|s| *s == v) {
            Some(code) => code as f64,
            None => {
                seen.push(v);
                (seen.len() - 1) as f64
            }
        })
        .collect()
}

/// Max-min normalisation of continuous columns; categorical columns are
/// label-encoded then scaled the same way. Constant columns become zeros.
pub fn preprocess(dataset: &Dataset) -> Dataset {
    let mut cov = dataset.covariates.clone();
    for (j, kind) in dataset.feature_kinds.iter().enumerate() {
        let mut col = cov.column_mut(j);
        if *kind == FeatureKind::Categorical {
            let codes = label_encode(col.iter().map(|v| v.to_bits()));
            col.iter_mut().zip(codes).for_each(|(v, c)| *v = c);
        }
        let (lo, hi) = col
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let range = hi - lo;
        if range > 0.0 {
            col.mapv_inplace(|v| (v - lo) / range);
        } else {
            col.fill(0.0);
        }
    }
    Dataset {
        covariates: cov,
        ..dataset.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwinRecord {
    pub weight: f64,
    pub outcome: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwinPair {
    pub covariates: Vec<f64>,
    pub lighter: TwinRecord,
    pub heavier: TwinRecord,
}

/// Turns twin pairs into an observational dataset: pairs closer than
/// `weight_gap` are dropped, one twin per pair is observed (treated when it
/// is the heavier one) and its sibling supplies the counterfactual.
pub fn pair_twins(pairs: &[TwinPair], weight_gap: f64, seed: u64) -> Result<Dataset> {
    let mut rng = rng_from_seed(seed);
    let kept: Vec<&TwinPair> = pairs
        .iter()
        .filter(|p| (p.heavier.weight - p.lighter.weight).abs() >= weight_gap)
        .collect();
    if kept.is_empty() {
        return Err(Error::NoTwinPairs);
    }
    let d = kept[0].covariates.len();
    let mut covariates = Array2::zeros((kept.len(), d));
    let mut treatment = Vec::with_capacity(kept.len());
    let mut outcome = Vec::with_capacity(kept.len());
    let mut counterfactual = Vec::with_capacity(kept.len());
    for (i, pair) in kept.iter().enumerate() {
        if pair.covariates.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: pair.covariates.len(),
            });
        }
        for (j, &v) in pair.covariates.iter().enumerate() {
            covariates[[i, j]] = v;
        }
        let (heavy, light) = if pair.heavier.weight >= pair.lighter.weight {
            (pair.heavier, pair.lighter)
        } else {
            (pair.lighter, pair.heavier)
        };
        let heavier_selected = rng.random_bool(0.5);
        let (observed, sibling) = if heavier_selected { (heavy, light) } else { (light, heavy) };
        treatment.push(heavier_selected);
        outcome.push(observed.outcome);
        counterfactual.push(sibling.outcome);
    }
    Dataset::new(
        covariates,
        treatment,
        outcome,
        Some(counterfactual),
        vec![FeatureKind::Continuous; d],
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AteMode {
    /// Mean of unit-level effects.
    #[default]
    Mean,
    /// Group sums weighted by group fractions, as used for the IHDP/TWINS
    /// benchmark tables.
    AsPrinted,
}

pub fn ground_truth_ate(dataset: &Dataset, mode: AteMode) -> Result<f64> {
    let cf = dataset.counterfactual().ok_or(Error::MissingCounterfactual)?;
    let n = dataset.n() as f64;
    let mut treated_sum = 0.0;
    let mut control_sum = 0.0;
    let mut n_treated = 0usize;
    for i in 0..dataset.n() {
        if dataset.treatment[i] {
            treated_sum += dataset.outcome[i] - cf[i];
            n_treated += 1;
        } else {
            control_sum += cf[i] - dataset.outcome[i];
        }
    }
    let n_control = dataset.n() - n_treated;
    Ok(match mode {
        AteMode::Mean => (treated_sum + control_sum) / n,
        AteMode::AsPrinted => {
            n_treated as f64 / n * treated_sum + n_control as f64 / n * control_sum
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Effect {
    Constant { tau: f64 },
    /// `tau(x) = intercept + slope * x[feature]`.
    Linear { feature: usize, intercept: f64, slope: f64 },
}

impl Effect {
    pub fn at(&self, x: &[f64]) -> f64 {
        match *self {
            Effect::Constant { tau } => tau,
            Effect::Linear {
                feature,
                intercept,
                slope,
            } => intercept + slope * x[feature],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confounding {
    None,
    /// Propensity rises linearly from 0.1 to 0.9 along the first relevant covariate.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub effect: Effect,
    pub confounding: Confounding,
    pub noise_sd: f64,
    /// When false a unit step is added to the outcome surface.
    pub lipschitz_outcome: bool,
    /// Leading covariates drawn from {0, 1} that influence neither outcome
    /// nor treatment.
    pub shared_value_features: usize,
}

impl SyntheticSpec {
    pub fn constant(n: usize, d: usize, tau: f64) -> Self {
        Self {
            n,
            d,
            effect: Effect::Constant { tau },
            confounding: Confounding::None,
            noise_sd: 1.0,
            lipschitz_outcome: true,
            shared_value_features: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        if self.d == 0 {
            return Err(Error::InvalidParameter("d must be at least 1".into()));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::InvalidParameter("noise_sd must be finite and >= 0".into()));
        }
        if self.shared_value_features >= self.d {
            return Err(Error::InvalidParameter(
                "at least one covariate must be relevant".into(),
            ));
        }
        if let Effect::Linear { feature, .. } = self.effect {
            if feature >= self.d {
                return Err(Error::InvalidParameter(format!(
                    "effect feature {feature} out of range for d = {}",
                    self.d
                )));
            }
        }
        Ok(())
    }

    /// Noise-free outcome surface shared by both potential outcomes.
    pub fn baseline(&self, x: &[f64]) -> f64 {
        let rel = &x[self.shared_value_features..];
        let mut g = 2.0 * rel[0];
        if let Some(&v) = rel.get(1) {
            g += (std::f64::consts::PI * v).sin();
        }
        if let (Some(&a), Some(&b)) = (rel.get(2), rel.get(3)) {
            g += a * b;
        }
        if !self.lipschitz_outcome && rel[0] > 0.5 {
            g += 1.5;
        }
        g
    }

    pub fn propensity(&self, x: &[f64]) -> f64 {
        match self.confounding {
            Confounding::None => 0.5,
            Confounding::Linear => 0.1 + 0.8 * x[self.shared_value_features],
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub dataset: Dataset,
    pub true_ate: f64,
    pub true_ite: Vec<f64>,
}

/// Draws `Y = tau(X) T + g(X) + eps` with covariates uniform on the unit cube.
/// Both potential outcomes share the noise draw, so `true_ite` is exact.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = rng_from_seed(seed);
    let noise = Normal::new(0.0, spec.noise_sd).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let (n, d) = (spec.n, spec.d);
    let mut covariates = Array2::zeros((n, d));
    let mut treatment = Vec::with_capacity(n);
    let mut outcome = Vec::with_capacity(n);
    let mut counterfactual = Vec::with_capacity(n);
    let mut true_ite = Vec::with_capacity(n);
    let mut x = vec![0.0; d];
    for i in 0..n {
        for (j, v) in x.iter_mut().enumerate() {
            let u: f64 = rng.random();
            *v = if j < spec.shared_value_features {
                if u < 0.5 { 0.0 } else { 1.0 }
            } else {
                u
            };
            covariates[[i, j]] = *v;
        }
        let treated = rng.random::<f64>() < spec.propensity(&x);
        let eps = noise.sample(&mut rng);
        let tau = spec.effect.at(&x);
        let y0 = spec.baseline(&x) + eps;
        let y1 = y0 + tau;
        treatment.push(treated);
        if treated {
            outcome.push(y1);
            counterfactual.push(y0);
        } else {
            outcome.push(y0);
            counterfactual.push(y1);
        }
        true_ite.push(tau);
    }
    let true_ate = true_ite.iter().sum::<f64>() / n as f64;
    let dataset = Dataset::new(
        covariates,
        treatment,
        outcome,
        Some(counterfactual),
        vec![FeatureKind::Continuous; d],
    )?;
    Ok(SyntheticData {
        dataset,
        true_ate,
        true_ite,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use std::io::Write as _;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_minimal_csv() {
        let f = write_tmp("t,y,x0,x1\n1,2.5,0.1,3\n0,1.0,0.2,4\n");
        let ds = load_csv(f.path(), &Schema::default()).unwrap();
        assert_eq!((ds.n(), ds.d()), (2, 2));
        assert_eq!(ds.treatment(), &[true, false]);
        assert_eq!(ds.outcome(), &[2.5, 1.0]);
        assert_eq!(ds.row(1), &[0.2, 4.0]);
        assert!(ds.counterfactual().is_none());
    }

    #[test]
    fn rejects_non_binary_treatment() {
        let f = write_tmp("t,y,x0\n1,2,0\n2,1,1\n");
        let err = load_csv(f.path(), &Schema::default()).unwrap_err();
        assert!(err.to_string().contains("non-binary treatment"), "{err}");
    }

    #[test]
    fn rejects_missing_outcome_column() {
        let f = write_tmp("t,x0\n1,0\n");
        assert!(matches!(
            load_csv(f.path(), &Schema::default()),
            Err(Error::MissingColumn(c)) if c == "y"
        ));
    }

    #[test]
    fn rejects_ragged_and_non_numeric_rows() {
        let f = write_tmp("t,y,x0\n1,2,0\n0,1\n");
        assert!(matches!(load_csv(f.path(), &Schema::default()), Err(Error::RaggedRow { row: 1, .. })));
        let f = write_tmp("t,y,x0\n1,abc,0\n");
        assert!(matches!(load_csv(f.path(), &Schema::default()), Err(Error::NonNumeric { .. })));
        let f = write_tmp("t,y,x0\n1,,0\n");
        assert!(matches!(load_csv(f.path(), &Schema::default()), Err(Error::MissingValue { .. })));
    }

    #[test]
    fn missing_file_is_an_error() {
        assert!(matches!(
            load_csv(Path::new("/definitely/not/here.csv"), &Schema::default()),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn schema_roles_and_categoricals() {
        let f = write_tmp("treatment,y_factual,y_cfactual,mu0,color,x\n1,3,1,0,a,5\n0,2,4,0,b,6\n1,7,5,0,a,7\n");
        let schema = Schema {
            treatment: "treatment".into(),
            outcome: "y_factual".into(),
            counterfactual: Some("y_cfactual".into()),
            drop: vec!["mu0".into()],
            kinds: HashMap::new(),
        };
        let ds = load_csv(f.path(), &schema).unwrap();
        assert_eq!(ds.feature_names(), &["color".to_string(), "x".to_string()]);
        assert_eq!(ds.feature_kinds(), &[FeatureKind::Categorical, FeatureKind::Continuous]);
        assert_eq!(ds.covariates().column(0).to_vec(), vec![0.0, 1.0, 0.0]);
        assert_eq!(ds.counterfactual(), Some(&[1.0, 4.0, 5.0][..]));
    }

    #[test]
    fn preprocess_examples() {
        let cov = array![[0.0, 3.0, 7.0], [5.0, 3.0, 9.0], [10.0, 3.0, 7.0]];
        let ds = Dataset::new(
            cov,
            vec![true, false, true],
            vec![1.0, 2.0, 3.0],
            None,
            vec![FeatureKind::Continuous, FeatureKind::Continuous, FeatureKind::Categorical],
        )
        .unwrap();
        let p = preprocess(&ds);
        assert_eq!(p.covariates().column(0).to_vec(), vec![0.0, 0.5, 1.0]);
        assert_eq!(p.covariates().column(1).to_vec(), vec![0.0, 0.0, 0.0]);
        assert_eq!(p.covariates().column(2).to_vec(), vec![0.0, 1.0, 0.0]);
        assert_eq!(preprocess(&p), p);
    }

    #[test]
    fn categorical_strings_encode_then_scale() {
        let f = write_tmp("t,y,c\n1,1,a\n0,1,b\n1,1,a\n");
        let ds = preprocess(&load_csv(f.path(), &Schema::default()).unwrap());
        assert_eq!(ds.covariates().column(0).to_vec(), vec![0.0, 1.0, 0.0]);
    }

    fn pair(light: f64, heavy: f64) -> TwinPair {
        TwinPair {
            covariates: vec![0.5, 1.0],
            lighter: TwinRecord { weight: light, outcome: 1.0 },
            heavier: TwinRecord { weight: heavy, outcome: 0.0 },
        }
    }

    #[test]
    fn twin_pairing_rules() {
        let ds = pair_twins(&[pair(1000.0, 1600.0)], 500.0, 3).unwrap();
        let cf = ds.counterfactual().unwrap();
        if ds.is_treated(0) {
            assert_eq!((ds.outcome()[0], cf[0]), (0.0, 1.0));
        } else {
            assert_eq!((ds.outcome()[0], cf[0]), (1.0, 0.0));
        }
        assert!(matches!(pair_twins(&[pair(1000.0, 1300.0)], 500.0, 3), Err(Error::NoTwinPairs)));
        let pairs = vec![pair(1000.0, 1000.0), pair(1000.0, 1300.0), pair(900.0, 2000.0)];
        assert_eq!(pair_twins(&pairs, 0.0, 1).unwrap().n(), 3);
        // Both selections occur over many pairs.
        let many: Vec<_> = (0..200).map(|_| pair(1000.0, 1600.0)).collect();
        let ds = pair_twins(&many, 500.0, 9).unwrap();
        let treated = ds.treatment().iter().filter(|&&t| t).count();
        assert!(treated > 60 && treated < 140, "{treated}");
    }

    #[test]
    fn ground_truth_modes() {
        // Treated effects {1, 3}, control effect {2}.
        let ds = Dataset::new(
            array![[0.0], [0.0], [0.0]],
            vec![true, true, false],
            vec![1.0, 4.0, 0.0],
            Some(vec![0.0, 1.0, 2.0]),
            vec![FeatureKind::Continuous],
        )
        .unwrap();
        assert!((ground_truth_ate(&ds, AteMode::Mean).unwrap() - 2.0).abs() < 1e-12);
        assert!((ground_truth_ate(&ds, AteMode::AsPrinted).unwrap() - 10.0 / 3.0).abs() < 1e-12);

        let constant = Dataset::new(
            array![[0.0], [1.0]],
            vec![true, false],
            vec![5.0, 1.0],
            Some(vec![3.0, 3.0]),
            vec![FeatureKind::Continuous],
        )
        .unwrap();
        assert_eq!(ground_truth_ate(&constant, AteMode::Mean).unwrap(), 2.0);
        let no_cf = Dataset::new(array![[0.0]], vec![true], vec![1.0], None, vec![FeatureKind::Continuous]).unwrap();
        assert!(matches!(ground_truth_ate(&no_cf, AteMode::Mean), Err(Error::MissingCounterfactual)));
    }

    #[test]
    fn synthetic_constant_and_heterogeneous() {
        let s = generate_synthetic(&SyntheticSpec::constant(500, 3, 2.0), 1).unwrap();
        assert_eq!(s.true_ate, 2.0);
        let truth = ground_truth_ate(&s.dataset, AteMode::Mean).unwrap();
        assert!((truth - s.true_ate).abs() < 1e-12);

        let spec = SyntheticSpec {
            effect: Effect::Linear { feature: 0, intercept: 0.0, slope: 1.0 },
            ..SyntheticSpec::constant(20_000, 2, 0.0)
        };
        let s = generate_synthetic(&spec, 5).unwrap();
        let mean_x0 = s.dataset.covariates().column(0).mean().unwrap();
        assert!((s.true_ate - mean_x0).abs() < 1e-12);
        assert!((s.true_ate - 0.5).abs() < 0.01);
        let truth = ground_truth_ate(&s.dataset, AteMode::Mean).unwrap();
        assert!((truth - s.true_ate).abs() < 1e-9);
    }

    #[test]
    fn synthetic_is_deterministic_and_validated() {
        let spec = SyntheticSpec {
            confounding: Confounding::Linear,
            shared_value_features: 1,
            ..SyntheticSpec::constant(50, 4, 1.0)
        };
        let a = generate_synthetic(&spec, 42).unwrap();
        let b = generate_synthetic(&spec, 42).unwrap();
        let dir = tempfile::tempdir().unwrap();
        a.dataset.write_csv(&dir.path().join("a.csv")).unwrap();
        b.dataset.write_csv(&dir.path().join("b.csv")).unwrap();
        let ba = std::fs::read(dir.path().join("a.csv")).unwrap();
        assert_eq!(ba, std::fs::read(dir.path().join("b.csv")).unwrap());
        assert_eq!(a.dataset, b.dataset);
        assert!(a.dataset.covariates().column(0).iter().all(|&v| v == 0.0 || v == 1.0));
        assert!(generate_synthetic(&SyntheticSpec::constant(0, 2, 1.0), 0).is_err());
        assert!(generate_synthetic(&SyntheticSpec { noise_sd: -1.0, ..SyntheticSpec::constant(5, 2, 1.0) }, 0).is_err());
    }
}
