use thiserror::Error;

/// Crate-wide error type.
///
/// Variants are grouped by how the CLI reports them: configuration and usage
/// problems exit with 1, data problems with 2, numeric failures with 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("{0}")]
    Unsupported(String),

    #[error("temperature {0} below minimum 1e-3")]
    InvalidTemperature(f64),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("non-finite input")]
    NonFinite,

    #[error("degenerate denominator in Möbius addition")]
    DegenerateDenominator,

    #[error("numeric failure in parameter {0}")]
    Numeric(String),
}

impl Error {
    /// Process exit status for the CLI: 1 usage/config, 2 data, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Shape(_)
            | Error::Unsupported(_)
            | Error::InvalidTemperature(_) => 1,
            Error::Parse { .. }
            | Error::InvalidDataset(_)
            | Error::UndefinedMetric(_)
            | Error::Io(_) => 2,
            Error::NonFinite | Error::DegenerateDenominator | Error::Numeric(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
