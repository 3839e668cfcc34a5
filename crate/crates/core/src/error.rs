use thiserror::Error;

/// Every failure surfaced by the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("operator cannot be materialized as a dense matrix: {0}")]
    NotMaterializable(String),

    #[error("group partition invalid: {0}")]
    Partition(String),

    #[error("blocks do not cover the vector: {0}")]
    Coverage(String),

    #[error("decomposition failed: {0}")]
    Decomposition(String),

    #[error("value oracle returned +inf at the prox output of a {0} function")]
    InfiniteAtProx(String),

    #[error("assumption violated: {0}")]
    AssumptionFailed(String),

    #[error("a Lipschitz constant for the gradient of the smooth part is required: {0}")]
    MissingLipschitz(String),

    #[error("stiff/failed: step size underflow at t = {t:e} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("non-finite state at t = {t:e}")]
    NonFinite { t: f64 },

    #[error("inner solve failed after {iterations} iterations (gradient norm {grad_norm:e})")]
    InnerSolveFailed { iterations: usize, grad_norm: f64 },

    #[error("dual unbounded: inner objective fell below {0:e}")]
    DualUnbounded(f64),

    #[error("graph is disconnected")]
    Disconnected,

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("iteration diverged at index {iteration} (state norm {norm:e})")]
    Divergence { iteration: usize, norm: f64 },

    #[error("initial point is outside the region: {0}")]
    OutsideRegion(String),

    #[error("no admissible real root: {0}")]
    NoRealRoot(String),

    #[error("too few usable points for a fit: {0}")]
    TooFewPoints(usize),

    #[error("config error at key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dims(context: impl Into<String>, expected: usize, found: usize) -> Self {
        Error::DimensionMismatch {
            context: context.into(),
            expected,
            found,
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
