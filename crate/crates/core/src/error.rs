use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid mode {index}: {reason}")]
    InvalidMode { index: usize, reason: String },

    #[error("mode {index} is not contractive at theta = {theta}: Re(lambda) = {re}")]
    NotContractive { index: usize, theta: f64, re: f64 },

    #[error("mode {index} violates the domain condition at theta = {theta}: |Im| = {im} > {bound}")]
    DomainCondition { index: usize, theta: f64, im: f64, bound: f64 },

    #[error("mode budget exceeded: {requested} representatives requested, budget is {budget}")]
    ModeBudget { requested: usize, budget: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("state paths were not retained in the observation record")]
    MissingState,

    #[error("singular covariance: {0}")]
    Singular(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("too many degenerate replicates: {0}")]
    DegenerateExcess(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
