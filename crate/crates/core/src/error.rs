use thiserror::Error;

/// Errors raised by evaluation, quadrature and experiment routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid Jacobi parameters alpha={alpha}, beta={beta}: both must exceed -1")]
    InvalidParams { alpha: f64, beta: f64 },

    #[error("argument {value} outside the domain {domain}")]
    Domain { value: f64, domain: &'static str },

    #[error("overflow evaluating degree {degree} at x={x}")]
    Overflow { degree: usize, x: f64 },

    #[error("non-finite value produced while evaluating the integrand at x={x}")]
    Evaluation { x: f64 },

    #[error(
        "quadrature did not converge after {refinements} refinements \
         (last estimates {previous:e} and {last:e})"
    )]
    NonConvergence { refinements: usize, previous: f64, last: f64 },

    #[error("L_p-normalized basis requested without a norm backend")]
    MissingNormBackend,

    #[error("eigenvalue iteration failed to converge for a {size}-point rule")]
    EigenSolver { size: usize },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
