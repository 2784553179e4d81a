use thiserror::Error;

/// Errors raised while building or analysing a sum set.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A spec, digit system, plan or config failed validation.
    #[error("validation error: {0}")]
    Validation(String),

    /// The separation condition needed by the requested formula does not hold.
    #[error("separation refused: {0}")]
    Separation(String),

    /// A hypothesis of one of the thinning constructions is violated.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    /// Anchor sequences are too close together for the requested construction.
    #[error("anchor sequences inadequate at j = {j}: {reason}")]
    AnchorInadequate { j: usize, reason: String },

    /// An enumeration or horizon budget would be exceeded.
    #[error("resource limit: {what} requires {required}, budget is {budget}")]
    Resource {
        what: String,
        required: u128,
        budget: u128,
    },

    /// Internal consistency check failed.
    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// True for errors caused by budgets or horizons rather than bad input.
    pub fn is_resource(&self) -> bool {
        matches!(self, Error::Resource { .. })
    }
}
