use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("non-finite entry in {0}")]
    NonFinite(String),

    #[error("invalid tolerance {0}: must be finite and non-negative")]
    InvalidTolerance(f64),

    #[error("target state is not reachable in {horizon} steps (relative residual {residual:e})")]
    Unreachable { horizon: usize, residual: f64 },

    #[error("bad shape: {0}")]
    BadShape(String),

    #[error("dataset already carries a noise model")]
    AlreadyNoisy,

    #[error("no combination of available horizons {available:?} sums to {target}")]
    NoComposition { available: Vec<usize>, target: usize },

    #[error("plan horizon {plan} does not match problem horizon {problem}")]
    HorizonMismatch { plan: usize, problem: usize },

    #[error(
        "data of segment {segment} (set {set}) is not full row rank: rank {rank} of {rows} rows, \
         smallest singular value {smallest_singular_value:e}"
    )]
    RankDeficientData {
        segment: usize,
        set: usize,
        rank: usize,
        rows: usize,
        smallest_singular_value: f64,
    },

    #[error("schema violation at `{path}`: {reason}")]
    SchemaViolation { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
