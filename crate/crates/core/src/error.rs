use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or out-of-range input. `field` names the offending input.
    #[error("invalid {field}: {reason}")]
    Input { field: String, reason: String },

    #[error("unsupported size: {0}")]
    UnsupportedSize(String),

    /// An `r x n` matrix with `r < n` cannot be an isometry `l_p^n -> l_p^r`.
    #[error("no isometry possible in {rows}x{cols} matrices (rows < cols)")]
    NoIsometryPossible { rows: usize, cols: usize },

    #[error("matrix is not l_p-polar decomposable: {0}")]
    NotDecomposable(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A post-condition check failed; indicates a numerical breakdown.
    #[error("internal consistency failure: {0}")]
    Internal(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn input(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Input { field: field.into(), reason: reason.into() }
    }
}
