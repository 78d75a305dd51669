use crate::field::Field;

/// Errors produced by the numerical routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate triangle {triangle}: area {area:e} below threshold {threshold:e}")]
    MeshQuality { triangle: usize, area: f64, threshold: f64 },

    #[error("mesh topology: {0}")]
    Topology(String),

    #[error("field has {actual} values but the mesh has {expected} vertices")]
    FieldLength { expected: usize, actual: usize },

    #[error("exponent {exponent:.3} exceeds the overflow limit on triangle {triangle}")]
    Overflow { triangle: usize, exponent: f64 },

    #[error("integrand is not finite on triangle {triangle}")]
    NonFiniteIntegrand { triangle: usize },

    #[error(
        "{solver} did not converge after {iterations} iterations (residual {residual:e}, best value {best_value})"
    )]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
        best_value: f64,
        best: Option<Box<Field>>,
    },

    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),

    #[error("mesh does not resolve the construction: local spacing {actual:e} exceeds required {required:e}")]
    Resolution { required: f64, actual: f64 },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
