//! Linear-Gaussian image deblurring by regularized deconvolution and by
//! posterior sampling.
//!
//! The blur model `y = A x + noise` uses a point-spread function either on a
//! torus (diagonalized by the 2-D DFT) or on a zero-padded latent grid with
//! nuisance border pixels. The prior precision is `delta L` with `L` the
//! 4-neighbor graph Laplacian and the noise precision is `gamma`.
//!
//! * [`regularize`]: generalized deconvolution and L-curve selection.
//! * [`spectral`]: fast evaluation of the marginal-density ingredients
//!   `f(lambda)` and `g(lambda)` for the periodic model.
//! * [`samplers`]: block Gibbs, one-block, and marginal-then-conditional
//!   samplers over `(gamma, delta)` and the image.
//! * [`nonperiodic`]: Krylov solves, stochastic traces and Taylor expansions
//!   for models without a fast diagonalization.
//! * [`diagnostics`]: autocorrelation, IACT, CCES and histograms.

// NaN must fail positivity checks, hence `!(x > 0.0)` throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod diagnostics;
pub mod error;
pub mod fft;
pub mod grid;
pub mod io;
pub mod model;
pub mod nonperiodic;
pub mod problem;
pub mod regularize;
pub mod rng;
pub mod samplers;
pub mod spectral;
pub mod sum;
pub mod synth;

pub use error::{Error, Result};
pub use grid::ImageGrid;
pub use model::{Boundary, ForwardModel, LaplacianOp, Psf, Region};
pub use problem::{DeblurProblem, GaussianProblem};
pub use samplers::{GammaPrior, Hyper, HyperPrior};
