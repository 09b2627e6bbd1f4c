use thiserror::Error;

/// Errors produced by the deblurring and sampling routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    Dimension {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("point-spread function region has zero total intensity")]
    DegeneratePsf,

    #[error("singular system: {0}")]
    Singular(String),

    #[error("log-determinant is infinite: {} spectral zero(s) in the forward operator (first modes {:?})", .modes.len(), &.modes[..modes.len().min(8)])]
    SpectralZeros { modes: Vec<usize> },

    #[error("L-curve has no corner (points are collinear or non-convex)")]
    NoCorner,

    #[error(
        "iterative solve did not converge: relative residual {relative_residual:.3e} after {iterations} iterations"
    )]
    Convergence {
        iterations: usize,
        relative_residual: f64,
        best: Vec<f64>,
    },

    #[error("mode search did not converge after {} outer iterations; last lambda {:.4e}", .iterates.len() - 1, .iterates.last().copied().unwrap_or(f64::NAN))]
    ModeSearch { iterates: Vec<f64> },

    #[error("sampler requires a conjugate Gamma hyperprior")]
    UnsupportedPrior,

    #[error("series is constant; autocorrelation undefined")]
    DegenerateSeries,

    #[error("series is empty")]
    EmptySeries,

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
