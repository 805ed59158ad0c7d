use thiserror::Error;

/// Errors produced by the measure containers and the transport solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("balanced oracle called on unbalanced inputs (masses {mass_a} and {mass_b})")]
    Unbalanced { mass_a: f64, mass_b: f64 },

    #[error("measure has zero total mass")]
    ZeroMass,

    #[error("FW requires smooth φ° (KL divergences on both sides), got {0}")]
    NonSmoothDivergence(String),

    #[error("projection set is empty")]
    EmptyProjectionSet,

    #[error("not on the probability simplex: {0}")]
    NotOnSimplex(String),

    #[error("problem exceeds the dense oracle size cap: {0}")]
    SizeCap(String),

    #[error("sinkhorn did not converge after {iterations} iterations (residual {residual:e} at epsilon {epsilon:e})")]
    NonConvergence { iterations: usize, residual: f64, epsilon: f64 },

    #[error("solver state does not match the inputs: {0}")]
    StateMismatch(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for malformed inputs (bad files, shapes, parameters), false for
    /// failures raised by a solver on otherwise well-formed inputs.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidMeasure(_)
                | Error::DimensionMismatch { .. }
                | Error::ShapeMismatch(_)
                | Error::InvalidParameter(_)
                | Error::NotOnSimplex(_)
                | Error::Parse(_)
                | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
