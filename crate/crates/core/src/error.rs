use thiserror::Error;

pub type Result<T> = std::result::Result<T, HalluError>;

#[derive(Debug, Error)]
pub enum HalluError {
    /// Caller supplied something malformed: wrong dimension, out-of-range parameter.
    #[error("invalid input: {0}")]
    Input(String),

    /// A model object violates its own invariants (e.g. covariance not positive definite).
    #[error("model error: {0}")]
    Model(String),

    /// A construction or bound hypothesis cannot be met for the given parameters.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// A fitted artifact needed for this step is absent.
    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl HalluError {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        HalluError::Input(msg.into())
    }

    pub(crate) fn model(msg: impl Into<String>) -> Self {
        HalluError::Model(msg.into())
    }
}
