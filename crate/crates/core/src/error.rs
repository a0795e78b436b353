use thiserror::Error;

/// Failures raised by the library. Each variant names the module that raises it.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("divergence: point {point:?} lies outside the domain of `{generator}`")]
    Domain { generator: String, point: Vec<f64> },

    #[error("divergence: dimension mismatch (expected {expected}, got {got})")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("divergence: domains of the combined generators do not intersect")]
    EmptyDomain,

    #[error("{module}: invalid parameter: {message}")]
    InvalidParameter { module: &'static str, message: String },

    #[error("{module}: unsupported operation: {message}")]
    Unsupported { module: &'static str, message: String },

    #[error("{module}: non-finite value produced: {message}")]
    NonFinite { module: &'static str, message: String },

    #[error("{module}: iteration did not converge: {message}")]
    Convergence { module: &'static str, message: String },

    #[error("geom_core: degenerate simplex (condition estimate {condition:e})")]
    DegenerateSimplex { condition: f64 },

    #[error("geom_core: feasible set is empty")]
    EmptyFeasibleSet,

    #[error("{module}: degenerate input: {message}")]
    Degenerate { module: &'static str, message: String },

    #[error("diagram: {subsets} subsets exceed the enumeration limit of {limit}")]
    TooManySubsets { subsets: u128, limit: u128 },

    #[error("sampling: region is empty")]
    EmptyRegion,

    #[error("sampling: epsilon-net exceeded {limit} points without certifying coverage")]
    NonTermination { limit: usize },

    #[error("exp_family: natural parameter {theta:?} is outside the natural space of {family}")]
    NaturalSpace { family: String, theta: Vec<f64> },
}

impl Error {
    /// True for failures of the numerics rather than of the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. }
                | Error::Convergence { .. }
                | Error::DegenerateSimplex { .. }
                | Error::NonTermination { .. }
        )
    }

    pub(crate) fn invalid(module: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter { module, message: message.into() }
    }

    pub(crate) fn unsupported(module: &'static str, message: impl Into<String>) -> Self {
        Error::Unsupported { module, message: message.into() }
    }

    pub(crate) fn non_finite(module: &'static str, message: impl Into<String>) -> Self {
        Error::NonFinite { module, message: message.into() }
    }

    pub(crate) fn degenerate(module: &'static str, message: impl Into<String>) -> Self {
        Error::Degenerate { module, message: message.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
