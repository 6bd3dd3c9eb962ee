use thiserror::Error;

use crate::membrane::AdmmReport;
use crate::rof::{DenoiseReport, GrayImage};

/// Errors raised by the solvers and their input validation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty data")]
    EmptyData,
    #[error("negative weight {value} at index {index}")]
    NegativeWeight { index: usize, value: f64 },
    #[error("prox parameter must be positive, got {0}")]
    NonpositiveGamma(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("data points are not sorted ascending at index {0}")]
    Unsorted(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("inconsistent bounds at coordinate {0}")]
    BadBounds(usize),
    #[error("{solver} did not converge (residual {residual:e})")]
    NoConvergence { solver: &'static str, residual: f64 },
    #[error("denoising did not converge within the iteration caps")]
    DenoiseNoConvergence(Box<(GrayImage, DenoiseReport)>),
    #[error("ADMM did not converge within {} iterations", .0.1.iterations)]
    AdmmNoConvergence(Box<(Vec<f64>, AdmmReport)>),
    #[error("line search stalled after {0} halvings")]
    LineSearchStall(u32),
    #[error("mesh too coarse: need at least 2 subdivisions, got {0}")]
    TooCoarse(usize),
    #[error("degenerate triangle {0}")]
    DegenerateElement(usize),
    #[error("linear solve failed after {iterations} iterations (relative residual {residual:e})")]
    LinearSolveFail { iterations: usize, residual: f64 },
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
