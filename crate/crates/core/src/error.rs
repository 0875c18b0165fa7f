use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("column {column} along axis {axis} sums to zero")]
    AllZeroColumn { axis: usize, column: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("non-finite value encountered")]
    NonFinite,
    #[error("invalid tensor: {0}")]
    InvalidTensor(String),
    #[error("precision must be positive, got {0}")]
    InvalidPrecision(f64),
    #[error("Dirichlet concentration must be positive, got {0}")]
    InvalidConcentration(f64),
    #[error("unknown reward location `{0}`")]
    UnknownLocation(String),
    #[error("index {index} out of range for axis `{axis}` of size {size}")]
    IndexOutOfRange {
        axis: String,
        index: usize,
        size: usize,
    },
    #[error("unknown factor `{0}`")]
    UnknownFactor(String),
    #[error("posterior vanished for factor {0}")]
    ZeroPosterior(usize),
    #[error("invalid model: {0}")]
    InvalidModel(String),
}
