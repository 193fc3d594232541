use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch between {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("{op}: {msg}")]
    InvalidShape { op: &'static str, msg: String },

    #[error("{op}: domain error, {msg}")]
    Domain { op: &'static str, msg: String },

    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("loss builder is not deterministic: {first} != {second} at identical parameters")]
    NonDeterministic { first: f64, second: f64 },

    #[error("parameter `{0}` has no gradient")]
    MissingGrad(String),

    #[error("attribute value {0} has no normalization group")]
    UnknownAttribute(u8),

    #[error(
        "attribute group {group} has {count} sample(s) in a training batch; \
         at least 2 are required (use stratified batching)"
    )]
    SingletonGroup { group: u8, count: usize },

    #[error("batch normalization in train mode needs at least 2 rows, got {0}")]
    BatchTooSmall(usize),

    #[error("model contains attribute-adaptive layers but no attributes were supplied")]
    MissingAttributes,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("{0}: empty input")]
    EmptyInput(&'static str),

    #[error("attribute group {0} is empty")]
    EmptyGroup(u8),

    #[error("no evaluable class: every class lacks positives or negatives in some group")]
    NoEvaluableClass,

    #[error("FATE undefined: baseline {0} is zero")]
    UndefinedFate(&'static str),

    #[error("{path}, row {row}: {msg}")]
    Table { path: PathBuf, row: usize, msg: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("unknown config key `{key}`{}", suggest(.suggestions))]
    UnknownKey { key: String, suggestions: Vec<String> },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn suggest(s: &[String]) -> String {
    if s.is_empty() {
        String::new()
    } else {
        format!("; did you mean: {}", s.join(", "))
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
