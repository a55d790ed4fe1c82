use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("beyond-horizon: query {query} exceeds the covered range ending at {max}")]
    BeyondHorizon { query: f64, max: f64 },
    #[error("query {query} lies below the covered range starting at {min}")]
    BelowRange { query: f64, min: f64 },
    #[error("degenerate-curve: curve has zero length")]
    DegenerateCurve,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
    #[error("invalid control: {0}")]
    InvalidControl(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("times must be increasing (violation at index {index})")]
    NonIncreasingTimes { index: usize },
    #[error("blow-up: state norm {norm:.3e} exceeded the bound at parameter s = {s}")]
    BlowUp { s: f64, norm: f64 },
    #[error("time-incomplete: trajectory reaches V = {reached}, horizon is {horizon}")]
    TimeIncomplete { reached: f64, horizon: f64 },
    #[error("lambda requires v >= 0, got {0}")]
    NegativeTimeRate(f64),
    #[error("infeasible: best endpoint residual {residual:.3e} exceeds tolerance {tolerance:.1e}")]
    Infeasible { residual: f64, tolerance: f64 },
    #[error("empty sequence")]
    EmptySequence,
    #[error("unknown {kind} '{name}'; available: {available}")]
    UnknownName {
        kind: &'static str,
        name: String,
        available: String,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
