use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("expected a point of dimension {expected}, got {found}")]
    ArityMismatch { expected: usize, found: usize },

    #[error("function value {value} at {point:?} is not finite")]
    NonFiniteValue { point: Vec<f64>, value: f64 },

    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("variable x{index} exceeds the declared dimension {arity}")]
    ArityExceeded { index: usize, arity: usize },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("sampler gave up after {rejections} consecutive rejections")]
    ExclusionSaturated { rejections: u64 },

    #[error("estimator has no finite-weight samples")]
    EmptyEstimator,

    #[error("sample weight is NaN")]
    InvalidWeight,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown builtin function `{0}`")]
    UnknownBuiltin(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("{0}")]
    Io(String),

    #[error("malformed trace: {0}")]
    Trace(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Trace(e.to_string())
    }
}
