use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: instance has {expected} items but the vector has {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{what} requires n <= {cap} but the instance has n = {n}")]
    EnumerationCapExceeded {
        what: &'static str,
        cap: usize,
        n: usize,
    },

    #[error("instance has {states} feasible solutions, above the matrix cap of {cap}")]
    MatrixCapExceeded { states: u64, cap: usize },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("{role} state {bits} is infeasible for this instance")]
    InfeasibleState { role: &'static str, bits: String },

    #[error("epsilon must lie strictly between 0 and 1, got {0}")]
    EpsilonOutOfRange(f64),

    #[error("delta must lie strictly between 0 and 1, got {0}")]
    DeltaOutOfRange(f64),

    #[error("step {step} is out of range for a path with {flips} flips")]
    StepOutOfRange { step: usize, flips: usize },

    #[error("{from}->{to} is not a feasible single-flip transition of this instance")]
    NoSuchEdge { from: String, to: String },

    #[error(
        "level {level} ratio estimated as 0 from {samples} samples; the true ratio is at \
         least 1/2, so the sampler failed to mix -- rerun with more samples per level"
    )]
    ZeroRatioEstimate { level: usize, samples: u64 },

    #[error("internal invariant violated: {0}")]
    InvariantViolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
