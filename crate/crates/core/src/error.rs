use thiserror::Error;

use crate::arch::Violation;

pub type Result<T, E = NasError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum NasError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid network: {}", format_violations(.0))]
    Invalid(Vec<Violation>),

    #[error("invalid layer: {0}")]
    InvalidLayer(String),

    #[error("search space error: {0}")]
    Space(String),

    #[error("decision {decision} index {index} out of range (has {len} choices)")]
    DecisionOutOfRange {
        decision: usize,
        index: usize,
        len: usize,
    },

    #[error("decision vector has {got} entries, space has {expected} decisions")]
    DecisionLength { expected: usize, got: usize },

    #[error("space size {size} exceeds enumeration cap {cap}")]
    EnumerationCap { size: String, cap: u64 },

    #[error("layer atom {0} is not part of the search space")]
    UnknownAtom(String),

    #[error("unknown feature bucket {0}")]
    UnknownBucket(String),

    #[error("normal equations are singular; use a ridge lambda > 0")]
    Singular,

    #[error("not enough records: need at least {need}, got {got}")]
    TooFewRecords { need: usize, got: usize },

    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("rank out of range: {0}")]
    Rank(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<NasError>,
    },
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl NasError {
    /// Stable short identifier for machine consumption.
    pub fn code(&self) -> &'static str {
        match self {
            NasError::Parse { .. } => "parse",
            NasError::Invalid(_) => "invalid_network",
            NasError::InvalidLayer(_) => "invalid_layer",
            NasError::Space(_) => "space",
            NasError::DecisionOutOfRange { .. } => "decision_out_of_range",
            NasError::DecisionLength { .. } => "decision_length",
            NasError::EnumerationCap { .. } => "enumeration_cap",
            NasError::UnknownAtom(_) => "unknown_atom",
            NasError::UnknownBucket(_) => "unknown_bucket",
            NasError::Singular => "singular",
            NasError::TooFewRecords { .. } => "too_few_records",
            NasError::Shape(_) => "shape",
            NasError::Rank(_) => "rank",
            NasError::NonFinite(_) => "non_finite",
            NasError::Config(_) => "config",
            NasError::AtStep { source, .. } => source.code(),
        }
    }

    pub(crate) fn from_json(err: serde_json::Error) -> Self {
        NasError::Parse {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}
