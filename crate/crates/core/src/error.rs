use sinet_tensor::TensorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("input {dim} of {size} is not divisible by {divisor}")]
    InputSize {
        dim: &'static str,
        size: usize,
        divisor: usize,
    },
    #[error("invalid training data: {0}")]
    Data(String),
    #[error(transparent)]
    Weights(#[from] WeightError),
}

#[derive(Debug, Error)]
pub enum WeightError {
    #[error("not a weight file (bad magic)")]
    BadMagic,
    #[error("unsupported weight file version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },
    #[error("weight file truncated while reading {0}")]
    Truncated(&'static str),
    #[error("unknown dtype tag {0}")]
    UnknownDtype(u8),
    #[error("parameter `{0}` is not part of the model")]
    Unexpected(String),
    #[error("parameter `{0}` missing from weight file")]
    Missing(String),
    #[error("parameter `{name}` has shape {found:?}, model expects {expected:?}")]
    Shape {
        name: String,
        found: [usize; 4],
        expected: [usize; 4],
    },
    #[error("malformed weight file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
