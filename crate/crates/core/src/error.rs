use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the registration library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite evaluation at x = {x}")]
    Evaluation { x: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("assumption A2 violated: rotated ordinate {value:e} < 0 at x = {x}, theta = {theta}")]
    A2Violation { x: f64, theta: f64, value: f64 },

    #[error("x = {x} is outside the image [{lo}, {hi}] of the transformed abscissa")]
    Range { x: f64, lo: f64, hi: f64 },

    #[error("model violation at theta = {theta}: {reason}")]
    ModelViolation { theta: f64, reason: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("no start converged: {0}")]
    NonConvergence(String),

    #[error("near-singular information matrix (condition number {cond:e})")]
    NearSingular { cond: f64 },

    #[error("target and reference grids differ: {0}")]
    GridMismatch(String),

    #[error("section {section} has {len} stations, need at least {min}")]
    TooFewPoints { section: usize, len: usize, min: usize },

    #[error("section {section} of curve {curve} is constant")]
    DegenerateSection { section: usize, curve: usize },

    #[error("error rate undefined for an all-zero curve")]
    UndefinedMetric,

    #[error("Monte Carlo harness failure: {0}")]
    Harness(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code class: 2 config, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) => 2,
            Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_)
            | Error::Data(_)
            | Error::InsufficientData(_)
            | Error::GridMismatch(_)
            | Error::TooFewPoints { .. }
            | Error::DegenerateSection { .. }
            | Error::UndefinedMetric => 3,
            _ => 4,
        }
    }
}
