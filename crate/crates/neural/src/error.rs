use thiserror::Error;

pub type Result<T, E = NeuralError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeuralError {
    #[error("shape mismatch in {op}: expected {expected}, got {actual}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        actual: String,
    },
    #[error("non-finite value produced by {op}")]
    NumericFault { op: &'static str },
    #[error("{op} requires a nonempty sequence")]
    EmptySequence { op: &'static str },
    #[error("temperature must be positive, got {0}")]
    InvalidTemperature(f64),
    #[error("target index {index} out of range for {len} classes")]
    IndexOutOfRange { index: usize, len: usize },
}

impl NeuralError {
    pub(crate) fn shape(op: &'static str, expected: impl ToString, actual: impl ToString) -> Self {
        NeuralError::ShapeMismatch {
            op,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
