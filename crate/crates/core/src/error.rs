use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("non-binary treatment `{value}` at row {row}")]
    NonBinaryTreatment { row: usize, value: String },
    #[error("non-numeric value `{value}` in column `{column}` at row {row}")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("missing value in column `{column}` at row {row}")]
    MissingValue { row: usize, column: String },
    #[error("ragged row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("dataset has no counterfactual outcomes")]
    MissingCounterfactual,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("subsample is empty (s_n = {0})")]
    EmptySubsample(usize),
    #[error("unknown leaf id {0}")]
    UnknownLeaf(usize),
    #[error("tolerance f({k}) = {value} is outside (0, {k})")]
    ToleranceOutOfRange { k: usize, value: f64 },
    #[error("tolerance table has no entry for K = {0}")]
    ToleranceUndefined(usize),
    #[error("cluster lacks a treated or control member")]
    MissingGroup,
    #[error("cluster is empty")]
    EmptyCluster,
    #[error("no cluster contains both treated and control instances")]
    NoRetainedClusters,
    #[error("no tree yields a defined effect for any instance")]
    NoDefinedEffect,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("every twin pair was excluded by the weight gap")]
    NoTwinPairs,
}

pub type Result<T> = std::result::Result<T, Error>;
