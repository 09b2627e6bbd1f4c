//! Models without a fast diagonalization: zero-padded blur with nuisance
//! border pixels and a Dirichlet prior.
//!
//! All work goes through matrix-free solves with `A^T A + lambda L`. The
//! marginal over `(gamma, lambda)` is explored with Taylor expansions of
//! `f` and `g` whose coefficients come from a handful of solves and
//! stochastic trace estimates.

pub mod hutchinson;
pub mod mean;
pub mod mode;
pub mod mwg;
pub mod solver;
pub mod taylor;

pub use hutchinson::{exact_traces, hutchinson_traces, TraceEstimate, TraceMethod};
pub use mean::posterior_mean;
pub use mode::{find_mode, ExpansionConfig, ModeConfig, ModeResult};
pub use mwg::{mwg_nonperiodic_step, run_mwg_chain, ExpansionCenter, ExpansionSet};
pub use solver::{
    iterative_solve, FnOperator, IterativeSolverConfig, LinearOperator, SolveOutcome, SystemOperator, SystemSolver,
};
pub use taylor::{taylor_f, taylor_g, TaylorExpansion};
