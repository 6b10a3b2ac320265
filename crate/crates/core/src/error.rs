use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
///
/// Variants are split into input problems (bad shapes, bad files, bad
/// configuration) and numerical or guard failures; [`Error::exit_code`]
/// maps the two groups onto the command-line exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("class index {index} out of range for {n_classes} classes")]
    ClassOutOfRange { index: usize, n_classes: usize },

    #[error("probability row (sample {sample}, output {output}) sums to {sum}, not 1")]
    SimplexViolation {
        sample: usize,
        output: usize,
        sum: f64,
    },

    #[error("invalid confusion tensor: {0}")]
    InvalidConfusion(String),

    #[error("no observed entries")]
    EmptyMask,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("degenerate denominator: <B, C> = {value} is below the floor {floor}")]
    DegenerateDenominator { value: f64, floor: f64 },

    #[error("gradient unavailable for metric '{0}'")]
    GradientUnavailable(String),

    #[error("metric '{0}' is not fractional-linear")]
    NotFractionalLinear(String),

    #[error("bisection unsupported for this metric: {0}")]
    BisectionUnsupported(String),

    #[error("instance too large: K^(N*M) = {size} exceeds the enumeration limit {limit}")]
    InstanceTooLarge { size: f64, limit: u64 },

    #[error("degenerate ratio: baseline utility is {0}")]
    DegenerateRatio(f64),

    #[error("model has not been trained")]
    Untrained,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}, line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 2 for input errors, 3 for numerical or guard errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::DegenerateDenominator { .. }
            | Error::GradientUnavailable(_)
            | Error::NotFractionalLinear(_)
            | Error::BisectionUnsupported(_)
            | Error::InstanceTooLarge { .. }
            | Error::DegenerateRatio(_)
            | Error::Untrained => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
