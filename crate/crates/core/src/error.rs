use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the domain of the operation.
    #[error("invalid argument: {0}")]
    Domain(String),

    /// An iterative solver stopped without meeting its tolerance.
    #[error(
        "{solver} did not converge after {iterations} iterations (last estimate {estimate}, residual {residual:e})"
    )]
    NoConvergence { solver: &'static str, iterations: usize, estimate: f64, residual: f64 },

    /// No sample size up to the search cap satisfies the request.
    #[error("no sample size up to the cap of {cap} reaches the requested interval width {max_width}")]
    CapExceeded { cap: u64, max_width: f64 },

    /// The requested power cannot be reached with the given constraints.
    #[error("{what}: requested power {requested} is unattainable; maximum achievable power is {max_power:.4}")]
    Infeasible { what: String, requested: f64, max_power: f64 },

    /// A rate whose denominator is zero.
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// Predictive values of stratified data need class prevalences.
    #[error("predictive values of a stratified confusion matrix require class prevalences")]
    PrevalenceRequired,

    #[error("unknown class label {0:?}")]
    UnknownLabel(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("covariance matrix is singular or not positive definite{0}")]
    Singular(String),

    #[error("training split lacks class {class:?} (iteration {iteration}, fold {fold}); use stratified folds or larger classes")]
    MissingClassInFold { class: String, iteration: usize, fold: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
