use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("normalization violated: need k > l, got k = {k}, l = {l} (swap the roles of the monomials)")]
    Normalization { k: u32, l: u32 },

    #[error("non-finite integrand value at t = {t}")]
    NonFinite { t: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("gamma function pole at z = {0}")]
    Pole(f64),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("sweep failed: {failed} of {total} points failed")]
    SweepFailed { failed: usize, total: usize },

    #[error("ascent objective decreased from {before} to {after} at iteration {iteration}")]
    NotMonotone {
        iteration: usize,
        before: f64,
        after: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the error is a configuration/validation problem, as opposed to
    /// a numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParams(_) | Error::Normalization { .. } | Error::Domain(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
