use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GgpError {
    #[error("pivot variance must be positive, got {0}")]
    NonPositivePivot(f64),
    #[error("negative Schur complement {value} at index {index}")]
    NegativeSchur { index: usize, value: f64 },
    #[error("degenerate factor: zero diagonal at index {0}")]
    DegenerateFactor(usize),
    #[error("degenerate covariance: non-positive Schur complement at index {0}")]
    DegenerateCovariance(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(
        "delta correction is keyed on row indices and can only be evaluated through a gram matrix"
    )]
    PointwiseDeltaUnsupported,
    #[error("kernel contains a pivot-excluding delta correction but no pivot index was given")]
    MissingPivot,
    #[error("kernel self-covariance at pivot {0} is zero")]
    PivotNotInvertible(usize),
    #[error("inducing gram is not positive definite (pivot {index} = {value})")]
    SingularInducingGram { index: usize, value: f64 },
    #[error("pivot {0} is not a member of the group")]
    PivotNotMember(usize),
    #[error("unsupported combination: {0}")]
    UnsupportedCombination(String),
    #[error("negative variance scalar {0}")]
    NegativeScalar(f64),
    #[error("non-finite ELBO at epoch {epoch}")]
    NonFiniteElbo { epoch: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("schema error in {path}: {reason}")]
    SchemaError { path: PathBuf, reason: String },
    #[error("timestamps are not strictly increasing at row {row}")]
    NonMonotoneTime { row: usize },
    #[error("no usable rows remain after filtering")]
    EmptyAfterFilter,
    #[error("config error: {0}")]
    Config(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = GgpError> = std::result::Result<T, E>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(GgpError::DimensionMismatch { expected, got })
    }
}
