use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("column {0} is constant after centering")]
    ConstantColumn(usize),
    #[error("matrix is not positive definite (smallest eigenvalue {0:e})")]
    NotPositiveDefinite(f64),
    #[error("s-vector solver did not reach a feasible point")]
    SolverDiverged,
    #[error("knockoff factorization failed: target eigenvalue {0:e} below -1e-6")]
    FactorizationFailed(f64),
    #[error("elastic net did not converge (max KKT violation {0:e})")]
    NoConvergence(f64),
    #[error("need at least {required} rows for {p} variables, got {n}")]
    InsufficientSamples { n: usize, p: usize, required: usize },
    #[error("root bracket failed for t = {0}")]
    BracketFailure(f64),
    #[error("quadrature error estimate {0:e} above tolerance")]
    QuadratureFailure(f64),
    #[error("invalid precision spec: {0}")]
    InvalidSpec(String),
    #[error("sample covariance is singular")]
    SingularCovariance,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
