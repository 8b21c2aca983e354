use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("{what} must be even, got {value}")]
    OddDimension { what: &'static str, value: usize },

    #[error("matrix is not Hurwitz: eigenvalue {}{:+}i has real part above -1e-9", eigenvalue.re, eigenvalue.im)]
    NotHurwitz { eigenvalue: Complex64 },

    #[error("{what} is not symmetric (residual {residual:e})")]
    NotSymmetric { what: &'static str, residual: f64 },

    #[error("{what} is not antisymmetric (residual {residual:e})")]
    NotAntisymmetric { what: &'static str, residual: f64 },

    #[error("matrix is not Hermitian (residual {residual:e})")]
    NotHermitian { residual: f64 },

    #[error("{0} is not positive definite")]
    NotPositiveDefinite(&'static str),

    #[error("{what} is not positive semi-definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite {
        what: &'static str,
        min_eigenvalue: f64,
    },

    #[error("CCR matrix is singular (smallest singular value {min_singular:e})")]
    SingularTheta { min_singular: f64 },

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("physical realizability residual {residual:e} exceeds tolerance {tolerance:e}")]
    PhysicalRealizability { residual: f64, tolerance: f64 },

    #[error("{what} = {value} outside the admissible range {range}")]
    OutOfDomain {
        what: &'static str,
        value: f64,
        range: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quadratic-exponential functional is infinite: spectral radius {radius} >= 1 - 1e-8")]
    Infeasible { radius: f64 },

    #[error("numerical tolerance failure in {what}: {value:e} exceeds {tolerance:e}")]
    Tolerance {
        what: &'static str,
        value: f64,
        tolerance: f64,
    },

    #[error("{0} did not converge")]
    NoConvergence(&'static str),
}

impl Error {
    /// Broad category used for process exit codes.
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Infeasible { .. } => ErrorCategory::Infeasible,
            Error::Tolerance { .. } | Error::NotHermitian { .. }
            | Error::NoConvergence(_) => ErrorCategory::Numerical,
            _ => ErrorCategory::InvalidInput,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    InvalidInput,
    Infeasible,
    Numerical,
}
