use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("solver failed to reach tolerance: relative residual {residual:.3e} > {tol:.3e}")]
    SolverTolerance { residual: f64, tol: f64 },

    #[error("graphs do not match: {0}")]
    GraphMismatch(String),

    #[error("problem too large for this code path: {0}")]
    TooLarge(String),

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
