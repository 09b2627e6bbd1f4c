//! Dense reference computations for testing the deblurring library.
//!
//! Everything here factorizes full matrices and is only usable at test
//! scale (a few hundred unknowns). Nothing is shared with the production
//! code: operators are assembled from their definitions, and marginal
//! densities come from determinants and quadratic forms rather than from the
//! transform-domain formulas.

mod assemble;
mod marginal;
mod quadrature;

pub use assemble::{convolution_periodic, convolution_zero_padded, laplacian_dirichlet, laplacian_periodic, Kernel};
pub use marginal::{
    conditional_moments, derivative, hierarchical_log_marginal, log_marginal_general, solve_spd, trace_powers,
    DenseModel, MarginalValue, Pencil,
};
pub use quadrature::{log_spaced, quadrature_marginal, QuadratureTable};

pub type Matrix = nalgebra::DMatrix<f64>;
pub type Vector = nalgebra::DVector<f64>;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not symmetric (asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotSemidefinite(f64),
    #[error("matrix is singular")]
    Singular,
    #[error("quadrature grid too small: {0:.3e} of the mass sits on the boundary")]
    GridTooSmall(f64),
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

pub type Result<T, E = OracleError> = std::result::Result<T, E>;
