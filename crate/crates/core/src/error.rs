use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected length {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("singular evaluation: {0}")]
    Singularity(String),

    #[error("resolvent point coincides with eigenvalue #{index} ({value})")]
    SpectrumHit { index: usize, value: f64 },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("unsupported singularity: exponents ({a}, {b}) must lie in (0, 1)")]
    UnsupportedSingularity { a: f64, b: f64 },

    /// An exponent inequality required by the existence/regularity theory is violated.
    #[error("regime violated: {0}")]
    Regime(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("tolerance not met: {0}")]
    Tolerance(String),

    #[error("config error in key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn regime(msg: impl Into<String>) -> Self {
        Error::Regime(msg.into())
    }

    /// Short machine-readable category, used by the CLI and the C ABI.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape { .. } => "shape",
            Error::Singularity(_) => "singularity",
            Error::SpectrumHit { .. } => "spectrum_hit",
            Error::Input(_) => "input",
            Error::UnsupportedSingularity { .. } => "unsupported_singularity",
            Error::Regime(_) => "regime",
            Error::Precondition(_) => "precondition",
            Error::Tolerance(_) => "tolerance",
            Error::Config { .. } => "config",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Shape { expected, got })
    }
}
