use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("column `{0}` not found in header")]
    MissingColumn(String),

    #[error("duplicate pin `{0}`")]
    DuplicatePin(String),

    #[error("row {row}: empty pin")]
    EmptyPin { row: usize },

    #[error("parcel {pin}: field `{field}` is missing")]
    MissingValue { pin: String, field: &'static str },

    #[error("parcel {pin}: cannot take log of nonpositive `{field}` ({value})")]
    NonPositiveLog {
        pin: String,
        field: &'static str,
        value: f64,
    },

    #[error("unknown source field `{0}`")]
    UnknownField(String),

    #[error("invalid model spec: {0}")]
    InvalidSpec(String),

    #[error("underdetermined system: {rows} rows for {cols} columns")]
    Underdetermined { rows: usize, cols: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("rank deficient design (rank {rank} of {cols}); dependent columns: {}", dependent.join(", "))]
    RankDeficient {
        rank: usize,
        cols: usize,
        dependent: Vec<String>,
    },

    #[error("normal equations are singular")]
    SingularNormalEquations,

    #[error("no residual degrees of freedom")]
    ZeroDof,

    #[error("response is constant; R-squared is undefined")]
    ConstantResponse,

    #[error("model has no intercept")]
    NoIntercept,

    #[error("model has no regressors besides the intercept")]
    NoRegressors,

    #[error("column `{0}` has zero variance")]
    ZeroVariance(String),

    #[error("unknown column label `{0}`")]
    UnknownLabel(String),

    #[error("empty table")]
    EmptyTable,

    #[error("model has no coefficient for zone {0}")]
    MissingZoneCoefficient(String),

    #[error("unknown zone `{0}`")]
    UnknownZone(String),

    #[error("label mismatch: expected `{expected}`, found `{found}`")]
    LabelMismatch { expected: String, found: String },

    #[error("invalid generator settings: {0}")]
    InvalidTruth(String),

    #[error("non-finite t statistic")]
    NonFiniteStatistic,

    #[error("degrees of freedom must be at least 1, got {0}")]
    InvalidDof(f64),
}
