use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("requested sequence length must be at least 1")]
    ZeroLength,
    #[error("power profile is empty")]
    EmptyPowerProfile,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("index {index} out of range (valid: {valid})")]
    IndexOutOfRange { index: usize, valid: String },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("noise variance must be non-negative, got {0}")]
    NegativeNoiseVariance(f64),
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("matrix is singular or not positive definite")]
    SingularMatrix,
    #[error("recursion is not contractive (spectral radius {radius:.6})")]
    NonContractive { radius: f64 },
    #[error("invalid regime: {0}")]
    InvalidRegime(&'static str),
    #[error("filter is identically zero")]
    ZeroFilter,
    #[error("ensemble size {got} below the statistical floor {min}")]
    EnsembleTooSmall { got: usize, min: usize },
    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),
    #[error("config parse error on line {line}: {msg}")]
    ConfigParse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
