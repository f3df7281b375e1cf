use thiserror::Error;

/// Errors produced by the analysis, optimization, and simulation layers.
#[derive(Debug, Error)]
pub enum Error {
    /// A network or experiment configuration violates one or more invariants.
    /// The message lists every violation found, not just the first.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A mathematical function was called outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A caching distribution violates its structural invariants
    /// (non-canonical combinations, probabilities outside [0, 1], bad sum).
    #[error("invalid caching distribution: {0}")]
    InvalidDistribution(String),

    /// A marginal vector cannot be realized by any distribution over
    /// fixed-size cache combinations.
    #[error("infeasible marginals: {0}")]
    InfeasibleMarginals(String),

    /// An operation required a strictly positive caching marginal but one of
    /// the files involved has marginal zero.
    #[error("singular marginal: {0}")]
    SingularMarginal(String),

    /// A linear program has no feasible point (inconsistent constraints).
    #[error("infeasible linear program: {0}")]
    InfeasibleLp(String),

    /// Text or CSV payload could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
