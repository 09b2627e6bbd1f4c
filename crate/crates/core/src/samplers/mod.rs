//! Posterior sampling over the hyperparameters `theta = (gamma, delta)` and
//! the latent image.

mod chain;
mod conditional;
mod hyper;
mod posterior;
mod steps;

pub(crate) use chain::golden_max;
pub use chain::{draw_images, marginal_mode, run_chain, tune_proposals, Chain, ChainConfig, SamplerKind, Tuning};
pub use conditional::{conditional_mean, sample_conditional_x};
pub use hyper::{GammaPrior, Hyper, HyperPrior};
pub use posterior::{log_marginal, MarginalEval, PeriodicPosterior};
pub use steps::{
    gibbs_step, mtc_option1_step, mtc_option2_step, oneblock_step, ChainRng, FieldState, GaussianRandomWalk, Proposal,
    ThetaState,
};
