use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// Symmetric factorization failed; `pivot` is the zero-based failing pivot.
    #[error("matrix is singular or not positive definite at pivot {pivot}")]
    Singular { pivot: usize },

    /// Prediction error became nonpositive at `order` during the Levinson recursion.
    #[error("autocovariance sequence is degenerate at order {order}")]
    DegenerateSequence { order: usize },

    #[error("degenerate process: {0}")]
    DegenerateProcess(String),

    #[error("filter is not stable")]
    Unstable,

    #[error("insufficient data: need more than {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("insufficient context: filter of order {order} needs {order} past values, got {got}")]
    InsufficientContext { order: usize, got: usize },

    /// Fitting order `order` failed because the sample moment matrix is singular.
    #[error("sample moment matrix is singular when fitting order {order}")]
    SingularFit { order: usize },

    #[error("process spec error: {0}")]
    Spec(String),

    #[error("cost minimum attained at the search cap {cap}; increase the cap")]
    CapTooSmall { cap: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    /// Short machine-readable identifier used by the CLI error document.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Singular { .. } => "singular",
            Error::DegenerateSequence { .. } => "degenerate_sequence",
            Error::DegenerateProcess(_) => "degenerate_process",
            Error::Unstable => "unstable",
            Error::InsufficientData { .. } => "insufficient_data",
            Error::InsufficientContext { .. } => "insufficient_context",
            Error::SingularFit { .. } => "singular_fit",
            Error::Spec(_) => "spec",
            Error::CapTooSmall { .. } => "cap_too_small",
            Error::Contract(_) => "contract",
            Error::Config(_) => "config",
        }
    }
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
