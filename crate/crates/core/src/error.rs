use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while reading configs and datasets or validating instances.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path}: unexpected column `{column}`")]
    UnexpectedColumn { path: PathBuf, column: String },
    #[error("{path}, line {line}: cannot parse `{value}` as a number for feature `{feature}`")]
    BadNumber {
        path: PathBuf,
        line: u64,
        feature: String,
        value: String,
    },
    #[error("{path}, line {line}: empty value in column `{column}`")]
    EmptyCell {
        path: PathBuf,
        line: u64,
        column: String,
    },
    #[error("{path}, line {line}: unknown category `{value}` for feature `{feature}`")]
    UnknownCategory {
        path: PathBuf,
        line: u64,
        feature: String,
        value: String,
    },
    #[error("label column has {found} distinct classes; only binary tasks are supported")]
    NotBinary { found: usize },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("invalid instance: {0}")]
    Instance(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

/// Errors raised by model training and persistence.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("training split is empty")]
    EmptyTrainSplit,
    #[error("non-finite loss at epoch {epoch}, batch {batch} (last finite loss {last_finite})")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        last_finite: f64,
    },
    #[error("model file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("model file version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u16, expected: u16 },
    #[error("model file stores {found}-byte scalars, caller expects {expected}-byte scalars")]
    ScalarMismatch { found: u8, expected: u8 },
    #[error("model schema hash {found} does not match dataset schema hash {expected}")]
    SchemaMismatch { found: String, expected: String },
    #[error("corrupt model file: {0}")]
    Corrupt(String),
    #[error("invalid model: {0}")]
    Invalid(String),
}

/// Errors raised by the multi-criteria operations.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum McdaError {
    #[error("criteria arity mismatch: {left} vs {right}")]
    Arity { left: usize, right: usize },
    #[error("at least {min} criteria are required, got {found}")]
    TooFewCriteria { min: usize, found: usize },
}

/// Errors raised by the evaluation harness and report writers.
#[derive(Debug, Error)]
pub enum EvalError {
    #[error("nothing to aggregate: {0}")]
    Empty(String),
    #[error("arity mismatch: {0}")]
    Arity(String),
    #[error("invalid grid step {0}; expected 1/n with n >= 1")]
    InvalidStep(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

/// Crate-level error.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Mcda(#[from] McdaError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}
