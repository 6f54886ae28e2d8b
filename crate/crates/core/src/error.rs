use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point is not critical (gradient norm {grad_norm:e})")]
    NotCritical { grad_norm: f64 },

    #[error("degenerate Hessian (eigenvalue {eigenvalue:e})")]
    Degenerate { eigenvalue: f64 },

    #[error(
        "saddle has {negative} negative Hessian eigenvalues, Eyring-Kramers needs exactly one"
    )]
    NotEyringKramers { negative: usize },

    #[error("no convergence after {steps} steps")]
    NoConvergence { steps: u64 },

    #[error("replica {replica} timed out after {steps} steps")]
    Timeout { replica: u64, steps: u64 },

    #[error("{timeouts} of {n} replicas timed out (limit 1%)")]
    TooManyTimeouts { timeouts: usize, n: usize },

    #[error("need at least {min} samples, got {n}")]
    TooFewSamples { n: usize, min: usize },

    #[error("invalid generator: {0}")]
    InvalidGenerator(String),

    #[error("generator is reducible")]
    Reducible,

    #[error("generator is not reversible with respect to its invariant measure")]
    NotReversible,

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("invalid state set: {0}")]
    InvalidStateSet(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("path starts outside the metastable wells")]
    StartsOutsideWells,

    #[error("label {0} has zero occupation time")]
    MissingData(usize),

    #[error("solvability defect {defect:e} exceeds {tolerance:e}")]
    Solvability { defect: f64, tolerance: f64 },

    #[error("well {0} has zero measure")]
    EmptyWell(usize),
}
