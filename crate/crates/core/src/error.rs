use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// `e_alpha` sits within the resonance guard of an unperturbed level that
    /// enters a denominator.
    #[error("resonance: E_alpha = {e_alpha} is within {guard:e} of unperturbed level {level}")]
    Resonance { e_alpha: f64, level: usize, guard: f64 },

    #[error("eigensolver did not converge (matrix fingerprint {fingerprint:016x})")]
    NonConvergence { fingerprint: u64 },

    #[error("matrix dimension {n} exceeds the dense limit {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("no admissible NPT interval up to width {max_width}")]
    NoRegion { max_width: usize },

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("empty state filter")]
    EmptyFilter,

    #[error("bisection failed: {0}")]
    Bisection(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
