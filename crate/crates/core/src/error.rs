use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty measure")]
    EmptyMeasure,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("negative mass at index {index}: {value}")]
    NegativeMass { index: usize, value: f64 },
    #[error("non-finite cost entry at ({row}, {col})")]
    NonFiniteCost { row: usize, col: usize },
    #[error("infeasible transport: alpha = {alpha} exceeds available mass {available}")]
    Infeasible { alpha: f64, available: f64 },
    #[error("instance too large for brute force: {variables} plan variables (max {max})")]
    TooLarge { variables: usize, max: usize },
    #[error("kernel exp(-C/eps) under/overflows at eps = {eps}; use a larger eps or rescale the cost")]
    KernelRange { eps: f64 },
    #[error("joint cost requires metric loss")]
    JointCostRequiresMetric,
    #[error("Lipschitz certificate missing: |v| = {norm} exceeds gamma = {gamma}")]
    LipschitzCertificate { norm: f64, gamma: f64 },
    #[error("empty classifier set")]
    EmptyClassifierSet,
    #[error("weight {value} at index {index} exceeds cap {cap}")]
    CapViolation { index: usize, value: f64, cap: f64 },
    #[error("zero total weight")]
    ZeroWeight,
    #[error("non-finite gradient in {block}: {detail}")]
    NonFiniteGradient { block: &'static str, detail: String },
    #[error("solver failed: {0}")]
    Solver(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
