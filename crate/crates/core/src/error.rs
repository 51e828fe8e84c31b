use thiserror::Error;

use crate::tensor::SpaceLabel;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// Two operators being combined share a (party, port) label.
    #[error("layout conflict: label {0} appears on both sides")]
    LayoutConflict(SpaceLabel),

    #[error("unknown label {0}")]
    UnknownLabel(SpaceLabel),

    #[error("layout is not a permutation of the operator layout")]
    NotPermutation,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("total dimension {0} exceeds the supported maximum of 4096")]
    TooLarge(usize),

    #[error("operator is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Partial trace over the output did not return the identity.
    #[error("map is not trace preserving: trace over the output differs from the input identity by {0:.3e}")]
    NotTracePreserving(f64),

    #[error("invalid instrument: {0}")]
    InvalidInstrument(String),

    #[error("invalid process: {0}")]
    InvalidProcess(String),

    #[error("operation is biased; the construction requires an unbiased operation")]
    Biased,

    #[error("negative probability {0:.3e} beyond round-off")]
    NegativeProbability(f64),

    #[error("probabilities sum to {0} instead of 1")]
    NotNormalized(f64),

    #[error("process has zero trace")]
    ZeroTrace,

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("setting combination {0:?} is not covered by the table")]
    MissingSetting(Vec<usize>),

    #[error("expectation values need two-outcome (+1/-1) parties")]
    NonBinaryOutcomes,

    #[error("enumeration needs {0} deterministic bits, limit is 20")]
    InstanceTooLarge(usize),

    #[error("cardinality mismatch: {0}")]
    CardinalityMismatch(String),

    /// Raised by the optimizer when the template rejects a settings vector.
    #[error("template rejected settings {settings:?}: {source}")]
    Template {
        settings: Vec<f64>,
        #[source]
        source: Box<Error>,
    },
}
