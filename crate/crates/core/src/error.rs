use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied a value outside the operation's domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Dense 2^N x 2^N storage would exceed the configured ceiling.
    #[error(
        "N = {n} exceeds the capacity ceiling N = {max_n}: one dense {dim}x{dim} complex matrix needs {bytes} bytes"
    )]
    Capacity {
        n: usize,
        max_n: usize,
        dim: usize,
        bytes: u128,
    },

    /// A numerical invariant did not hold within its tolerance.
    #[error("invariant '{check}' failed: {detail}")]
    Invariant { check: String, detail: String },

    /// The highest-weight eigenproblem did not resolve a total-spin sector.
    #[error("could not resolve sector s = {s}, l = {l}: {detail}")]
    SectorResolution { s: i32, l: usize, detail: String },

    #[error("basis cache: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn invariant(check: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Invariant {
            check: check.into(),
            detail: detail.into(),
        }
    }

    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) => 2,
            Error::Invariant { .. } | Error::SectorResolution { .. } => 3,
            Error::Capacity { .. } => 4,
            Error::Cache(_) | Error::Io(_) | Error::Json(_) => 1,
        }
    }
}
