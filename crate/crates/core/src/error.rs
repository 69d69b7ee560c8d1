use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("point index {k} out of range for lattice with {n} points")]
    IndexOutOfRange { k: u64, n: u64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("size mismatch: expected {expected} entries, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("operands are bound to different lattices")]
    LatticeMismatch,

    #[error("unknown lattice preset `{0}`")]
    UnknownPreset(String),

    #[error("unknown splitting scheme `{0}`")]
    UnknownScheme(String),

    #[error("invalid splitting scheme `{name}`: {reason}")]
    InvalidScheme { name: String, reason: String },

    #[error(
        "anti-aliasing enumeration needs about {needed} candidates, budget is {budget}; \
         raise the candidate budget to proceed"
    )]
    CandidateBudget { needed: u64, budget: u64 },

    #[error("corrupt cache file {path}: {reason}")]
    CorruptCache { path: PathBuf, reason: String },

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error("non-finite value after step {step} of {total}")]
    NonFinite { step: u64, total: u64 },

    #[error("need at least {needed} usable points for an order fit, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("dense diagnostics are limited to n <= {limit}, got n = {n}")]
    TooLargeForDense { n: u64, limit: u64 },

    #[error("potential has no known trigonometric-polynomial coefficients")]
    NonPolynomialPotential,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed report: {0}")]
    Report(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
