use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration at `{field}`: {reason}")]
    Invalid { field: String, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("rank-deficient constraint matrix (normal-equation pivot {pivot:e})")]
    RankDeficient { pivot: f64 },

    #[error("point {value} outside the domain [{lo}, {hi}] of `{axis}`")]
    OutOfDomain {
        axis: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("fixed-point iteration did not converge at time level {time_index} after {iterations} sweeps (residual {residual:e})")]
    NoConvergence {
        time_index: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("non-finite value at x-node {x_index}, time level {time_index}")]
    NonFinite { x_index: usize, time_index: usize },

    #[error("volume slice y = {y}: {source}")]
    Slice { y: f64, source: Box<Error> },

    #[error("quote unavailable: volume {volume} outside the surface volume range [{lo}, {hi}]")]
    QuoteUnavailable { volume: f64, lo: f64, hi: f64 },

    #[error("quadrature did not converge: node-doubling disagreement {disagreement:e} above {tolerance:e}")]
    Quadrature { disagreement: f64, tolerance: f64 },

    #[error("exponential tilt diverges at y = {y}: {reason}")]
    DivergentTilt { y: f64, reason: String },

    #[error("{saturated} of {total} strategy nodes saturated (limit {limit}); widen the volume grid")]
    Saturation {
        saturated: usize,
        total: usize,
        limit: f64,
    },
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
