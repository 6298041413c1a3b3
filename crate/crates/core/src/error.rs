use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Input outside an operation's domain (zero vector, zero quaternion, kernel hit).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular matrix (det_h = {det:e})")]
    Singular { det: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A numerical self-check failed (conjugate pairing, determinant residue).
    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("ambiguous rank for eigenvalue {re}{im:+}i at power {k}: singular value ratio {ratio:e}")]
    AmbiguousRank { re: f64, im: f64, k: usize, ratio: f64 },

    /// Parameters that do not describe a member of the requested subclass.
    #[error("infeasible parameters: {0}")]
    Validation(String),

    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("search cap {cap} reached (best achieved {achieved:e})")]
    CapReached { cap: u64, achieved: f64 },

    /// A bounded search or clustering step produced an inconclusive answer.
    #[error("diagnostic: {0}")]
    Diagnostic(String),
}

pub type Result<T> = std::result::Result<T, Error>;
