use thiserror::Error;

use crate::model::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure modes shared by every inference routine in the crate.
///
/// Time indices carried by variants are zero-based positions in the
/// observation series.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("all log-weights are -inf")]
    DegenerateWeights,

    #[error("invalid model: {0}")]
    InvalidModel(ValidationReport),

    #[error("observation kind mismatch: model expects {expected} observations, got {found}")]
    KindMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("symbol {symbol} at t={t} is outside the alphabet of size {alphabet}")]
    SymbolOutOfRange {
        t: usize,
        symbol: usize,
        alphabet: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("observation at t={t} has zero probability under the model")]
    ImpossibleObservation { t: usize },

    #[error(
        "innovation covariance at t={t} is numerically singular (condition number {condition:e})"
    )]
    NumericalDegeneracy { t: usize, condition: f64 },

    #[error("{what} is not positive semidefinite")]
    NotPositiveSemidefinite { what: String },

    #[error("all particle weights vanished at t={t}")]
    ParticleCollapse { t: usize },

    #[error("replicate {rep} failed: {source}")]
    Replicate { rep: usize, source: Box<Error> },

    #[error("path enumeration over {paths} paths exceeds the guard of {limit}")]
    TooLarge { paths: f64, limit: usize },

    #[error("parameter on the boundary of the family: {0}")]
    Boundary(String),

    #[error("optimizer initialization failed: every vertex of the starting simplex is non-finite")]
    OptimizerInit,

    #[error("decay-rate fit needs at least two positive entries in the window, found {found}")]
    DegenerateCurve { found: usize },

    #[error("usage error: {0}")]
    Usage(String),
}

impl Error {
    /// True for failures that come from floating-point breakdown rather than
    /// from bad input data or models.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NumericalDegeneracy { .. }
            | Error::ParticleCollapse { .. }
            | Error::DegenerateWeights
            | Error::DegenerateCurve { .. }
            | Error::OptimizerInit => true,
            Error::Replicate { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Usage(_))
    }
}
