//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("dimension mismatch in {context}: {left} vs {right}")]
    DimensionMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("cosine distance is undefined for a zero vector")]
    ZeroVectorCosine,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("unknown memory id `{0}`")]
    UnknownId(String),

    #[error("distance between memories {i} and {j}: {source}")]
    PairwiseDistance {
        i: usize,
        j: usize,
        #[source]
        source: Box<CoreError>,
    },

    #[error("distance matrix is not symmetric at ({i}, {j})")]
    AsymmetricMatrix { i: usize, j: usize },

    #[error("distance matrix has a nonzero diagonal at {0}")]
    NonzeroDiagonal(usize),

    #[error("degenerate memory set: all pairwise distances are zero")]
    DegenerateSet,

    #[error("atom index {index} out of range for measure with {len} atoms")]
    AtomIndexOutOfRange { index: usize, len: usize },

    #[error("min-belief is not monotone in tau on this instance; calibration aborted")]
    CalibrationNotMonotone,

    #[error("training aborted at step {step}: non-finite {quantity}")]
    NonFiniteTraining { step: usize, quantity: &'static str },

    #[error("line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
