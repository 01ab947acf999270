use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("LP made no progress after {0} iterations")]
    LpStall(usize),
    #[error("LP relaxation is unbounded")]
    Unbounded,
    #[error("tableau row rhs {0} is near-integral")]
    NearIntegralRow(f64),
    #[error("cut pool index {index} out of range (pool size {size})")]
    PoolIndex { index: usize, size: usize },
    #[error("enumeration budget exceeded: {0} candidate points")]
    EnumerationBudget(u128),
    #[error("zero-norm vector in score computation")]
    ZeroNorm,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
