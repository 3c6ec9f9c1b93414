use thiserror::Error;

/// A single invariant violation found while validating a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    /// Dotted path of the offending field, e.g. `edca.cw_max[1]`.
    pub path: String,
    pub message: String,
}

impl FieldError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for FieldError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {}", join_fields(.0))]
    Config(Vec<FieldError>),

    #[error("invalid equilibrium at headway {headway} m: {reason}")]
    InvalidEquilibrium { headway: f64, reason: String },

    #[error("characteristic equation has no admissible real root: {0}")]
    NoRealRoot(String),

    #[error(
        "root finder did not converge after {iterations} iterations (last iterate {re}{im:+}i)"
    )]
    RootNotConverged { iterations: usize, re: f64, im: f64 },

    #[error("value outside the domain of the rate model: {0}")]
    Domain(String),

    #[error("degenerate regime: {0}")]
    Degenerate(String),

    #[error("fixed point did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        /// Max-abs update of the last iterations, oldest first.
        history: Vec<f64>,
    },

    #[error("distribution truncated: lost mass {0:e}")]
    Truncated(f64),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("rank-deficient regression input: {0}")]
    RankDeficient(String),

    #[error("i/o error: {0}")]
    Io(String),
}

fn join_fields(errs: &[FieldError]) -> String {
    errs.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
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

impl Error {
    /// True for errors caused by the user's configuration rather than by
    /// a numerical failure.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::InvalidParameter(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
