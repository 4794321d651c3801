//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by the library. Validation problems that are naturally
/// "data" (tree-pair violations, infeasible constraint systems) are returned
/// as values instead; these variants cover genuinely invalid requests.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("missing value for variable `{0}`")]
    MissingVariable(String),
    #[error("operation undefined on the zero polynomial")]
    ZeroPolynomial,
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("invalid bracketing: {0}")]
    InvalidBracketing(String),
    #[error("size mismatch: {0}")]
    Mismatch(String),
    #[error("invalid tree-pair: {}", .0.join("; "))]
    InvalidTreePair(Vec<String>),
    #[error("invalid 2-bracketing: {0}")]
    InvalidTwoBracketing(String),
    #[error("gluing assignment violates a coherence: {0}")]
    CoherenceViolation(String),
    #[error("expected a 0-dimensional tree-pair, got dimension {0}")]
    NonzeroDimension(usize),
    #[error("size bound exceeded: {what} needs {needed}, bound is {bound}")]
    SizeBound {
        what: String,
        needed: usize,
        bound: usize,
    },
    #[error("point outside chart domain: q_{{{i},{j}}} vanishes")]
    DomainViolation { i: usize, j: usize },
    #[error("point outside chart domain: {0}")]
    OutsideDomain(String),
    #[error("coincident pin points")]
    CoincidentPins,
    #[error("incidence pattern of canonical generators fails: {0}")]
    StructuralAssumption(String),
    #[error("invalid fiber spec: {0}")]
    InvalidSpec(String),
    #[error("the zero vector is not a valid type")]
    ZeroVector,
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
