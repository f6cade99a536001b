use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{what}: {value} exceeds the enumeration bound {bound}")]
    BoundExceeded { what: String, value: String, bound: u64 },

    #[error("no convergence for {0}")]
    NonConvergence(String),

    #[error("series diverges: {0}")]
    Divergence(String),

    #[error("degenerate entry law: residue {residue} mod {prime} has probability 1")]
    DegenerateDistribution { prime: u64, residue: u64 },

    #[error("level {have} at prime {prime} is too small; targets need L_p >= {needed}")]
    LevelTooSmall { prime: u64, needed: u32, have: u32 },

    #[error("mismatch: {0}")]
    Mismatch(String),

    #[error("prime support: {0}")]
    PrimeSupport(String),
}

impl Error {
    pub fn bound(what: impl Into<String>, value: impl ToString, bound: u64) -> Self {
        Error::BoundExceeded { what: what.into(), value: value.to_string(), bound }
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidPartition(_) => "invalid_partition",
            Error::InvalidInput(_) => "invalid_input",
            Error::BoundExceeded { .. } => "bound_exceeded",
            Error::NonConvergence(_) => "non_convergence",
            Error::Divergence(_) => "divergence",
            Error::DegenerateDistribution { .. } => "degenerate_distribution",
            Error::LevelTooSmall { .. } => "level_too_small",
            Error::Mismatch(_) => "mismatch",
            Error::PrimeSupport(_) => "prime_support",
        }
    }

    /// Computational limits (as opposed to bad input).
    pub fn is_computational(&self) -> bool {
        matches!(self, Error::BoundExceeded { .. } | Error::NonConvergence(_))
    }
}
