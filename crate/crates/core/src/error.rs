use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("domain invariant violated at node {node}: {reason}")]
    DomainInvariant { node: usize, reason: String },

    #[error("invalid metric at node {node}: least eigenvalue {lambda_min:e}")]
    InvalidMetric { node: usize, lambda_min: f64 },

    #[error("{solver}: no convergence after {iterations} iterations (residual {residual:e})")]
    IterationLimit { solver: &'static str, iterations: usize, residual: f64 },

    #[error("bisection bracket failure at node {node}: {reason}")]
    BracketFailure { node: usize, reason: String },

    #[error("{what}: monotonicity violated by {amount:e} at node {node}")]
    Monotonicity { what: &'static str, node: usize, amount: f64 },

    #[error("barrier construction failed at node {node}: {reason}")]
    Barrier { node: usize, reason: String },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("problem generation failed at node {node}: {reason}")]
    Generation { node: usize, reason: String },

    #[error("solutions disagree by {gap:e} (tolerance {tol:e}): {what}")]
    Disagreement { what: &'static str, gap: f64, tol: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
