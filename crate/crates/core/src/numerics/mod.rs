pub mod eig;
pub mod linalg;
pub mod matrix;
pub mod ode;

pub use eig::{eig_sym_generalized, GeneralizedEig};
pub use linalg::{lstsq_qr, solve_linear, CholeskyFactor, LuFactor};
pub use matrix::{axpy, dot, DenseMatrix};
pub use ode::{integrate_rk45, OdeSolution, OdeStats};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NumericsError {
    #[error("matrix is numerically singular (pivot {pivot} below threshold)")]
    SingularMatrix { pivot: usize },
    #[error("matrix is not positive definite (leading minor {minor} is non-positive)")]
    NotPositiveDefinite { minor: usize },
    #[error("matrix is not symmetric within tolerance")]
    NotSymmetric,
    #[error("eigenvalue iteration failed to converge at index {index}")]
    EigenNoConvergence { index: usize },
    #[error("step size underflow at t = {t} s (stiffness or blow-up)")]
    StepUnderflow { t: f64 },
    #[error("non-finite derivative encountered at t = {t} s")]
    NonFiniteRhs { t: f64 },
    #[error("output grid escapes the integration span")]
    GridOutOfSpan,
}
