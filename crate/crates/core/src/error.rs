use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("differenced series has no head values for order {order}")]
    MissingHead { order: usize },

    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("degenerate column `{0}`: zero variance")]
    DegenerateColumn(String),

    #[error("singular design matrix: {0}")]
    SingularDesign(String),

    #[error("invalid degrees of freedom: lags {lags} must exceed fitted parameters {fitted}")]
    InvalidDof { lags: usize, fitted: usize },

    #[error("optimizer failed: {0}")]
    OptimizerFailed(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no cointegrating relation (selected rank 0)")]
    NoCointegration,

    #[error("invalid cointegration rank {rank} for {vars} variables")]
    InvalidRank { rank: usize, vars: usize },

    #[error("residual covariance is not positive definite")]
    DegenerateCovariance,

    #[error("actual value is zero at index {index}")]
    DivisionByZero { index: usize },

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("forecast step {step}: {source}")]
    ForecastStep { step: usize, source: Box<Error> },
}

pub type Result<T> = std::result::Result<T, Error>;
