use thiserror::Error;

/// Errors produced by parsing, training, generation and the evaluation harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("missing column `{column}` in CSV header")]
    MissingColumn { column: String },

    #[error("row {row}: cannot parse timestamp `{value}`")]
    Timestamp { row: usize, value: String },

    #[error("row {row}: empty {field}")]
    EmptyField { row: usize, field: &'static str },

    #[error("event log contains no events")]
    EmptyLog,

    #[error("need at least 2 traces to split, got {0}")]
    TooFewTraces(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid sampler policy `{0}` (expected argmax, random, topk:<k>, nucleus:<p>, daemon, daemon-argmax)")]
    InvalidPolicy(String),

    #[error("invalid synthetic log spec: {0}")]
    InvalidSpec(String),

    #[error("mean absolute error over an empty set of pairs")]
    EmptyErrors,

    #[error("reports disagree on the evaluated sampler set: {0}")]
    MismatchedPolicies(String),

    #[error("unsupported model file: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
