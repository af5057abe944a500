use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric (relative defect {defect:.3e})")]
    NotSymmetric { defect: f64 },

    #[error("matrix is not positive-definite (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("function is not finite at eigenvalue {eigenvalue:.6e}")]
    NonFiniteSpectralValue { eigenvalue: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("probe {probe} produced a non-finite function value")]
    NonFiniteProbe { probe: usize },

    #[error("unknown measure '{0}'")]
    UnknownMeasure(String),

    #[error("parameters for {name} violate log-concavity: need {constraint}")]
    NotLogConcave { name: String, constraint: String },

    #[error("point {x:?} lies outside the support")]
    OutsideSupport { x: Vec<f64> },

    #[error("quadrature on [{lo}, {hi}] did not reach tolerance (error estimate {estimate:.3e})")]
    Quadrature { lo: f64, hi: f64, estimate: f64 },

    #[error("root finding failed: {0}")]
    RootFinding(String),

    #[error("hessian is ill-conditioned (condition estimate {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("identity violated: {name} (residual {residual:.3e})")]
    IdentityViolation { name: String, residual: f64 },

    #[error("grid covers only {captured:.9} of the mass")]
    InsufficientCoverage { captured: f64 },

    #[error("sinkhorn did not converge after {iterations} iterations (marginal error {marginal_error:.3e})")]
    NotConverged {
        iterations: usize,
        marginal_error: f64,
    },

    #[error("operation not supported: {0}")]
    Unsupported(String),
}
