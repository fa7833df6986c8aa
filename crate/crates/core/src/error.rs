use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhasorError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("thread index {index} out of range for {n_threads} threads")]
    IndexOutOfRange { index: usize, n_threads: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("unknown gate `{0}`")]
    UnknownGate(String),

    #[error("instruction {index} ({gate}): {reason}")]
    InvalidInstruction {
        index: usize,
        gate: String,
        reason: String,
    },

    #[error("duplicate measurement name `{0}`")]
    DuplicateMeasurement(String),

    #[error("instruction {index} ({gate}) is not a linear unitary gate")]
    UnsupportedComposition { index: usize, gate: String },

    #[error("instruction {index} ({gate}) is not differentiable")]
    UnsupportedGradient { index: usize, gate: String },

    #[error("gate `{0}` has no matrix representation")]
    NotLinear(String),
}

impl PhasorError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        PhasorError::InvalidArgument(msg.into())
    }
}

pub type Result<T, E = PhasorError> = std::result::Result<T, E>;
