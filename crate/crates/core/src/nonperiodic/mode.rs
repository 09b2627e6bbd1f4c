//! Mode of `pi(gamma, lambda | y)` by repeated local expansion.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::hutchinson::TraceMethod;
use super::solver::{IterativeSolverConfig, SystemSolver};
use super::taylor::{taylor_f, taylor_g, TaylorExpansion};
use crate::error::{Error, Result};
use crate::problem::GaussianProblem;
use crate::samplers::GammaPrior;

/// How expansions of `f` and `g` are built.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionConfig {
    pub order: usize,
    pub trace: TraceMethod,
    pub solver: IterativeSolverConfig,
    /// Log-density error allowed from the last retained term when sizing
    /// the trust radius.
    pub trust_tol: f64,
    /// Most expansion centers a sampler may add.
    pub max_centers: usize,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        Self {
            order: 4,
            trace: TraceMethod::default(),
            solver: IterativeSolverConfig::default(),
            trust_tol: 1e-2,
            max_centers: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeConfig {
    pub expansion: ExpansionConfig,
    /// Stop once `|lambda_next - lambda| / lambda` falls below this.
    pub stop_tol: f64,
    pub max_outer: usize,
    /// Trust tolerance used while searching; looser than for sampling so that
    /// early steps can move far.
    pub search_trust_tol: f64,
}

impl Default for ModeConfig {
    fn default() -> Self {
        Self {
            expansion: ExpansionConfig::default(),
            stop_tol: 1e-2,
            max_outer: 60,
            search_trust_tol: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeResult {
    pub lambda: f64,
    pub gamma: f64,
    /// Linear solves used in total.
    pub solves: usize,
    /// `lambda^(0), lambda^(1), ...` including the returned value.
    pub iterates: Vec<f64>,
    /// Expansions about the last center.
    pub f: TaylorExpansion,
    pub g: TaylorExpansion,
}

/// Shape of `gamma | lambda, y` and exponent of `lambda` in the marginal of
/// `(gamma, lambda)`.
pub(crate) fn exponents(m: usize, n: usize, prior: &GammaPrior) -> (f64, f64) {
    let shape = m as f64 / 2.0 + prior.alpha_gamma + prior.alpha_delta;
    let e_lambda = n as f64 / 2.0 + prior.alpha_delta - 1.0;
    (shape, e_lambda)
}

/// `log pi(gamma, lambda | y)` maximized over `gamma`, from values of `f` and
/// `g - g(center)` at `lambda`. Returns `(value, argmax gamma)`.
pub(crate) fn profile(shape: f64, e_lambda: f64, prior: &GammaPrior, lambda: f64, f: f64, g: f64) -> (f64, f64) {
    let k = shape - 1.0;
    let rate = 0.5 * f + prior.beta_gamma + prior.beta_delta * lambda;
    let gamma = k / rate;
    (k * gamma.ln() - k + e_lambda * lambda.ln() - 0.5 * g, gamma)
}

/// Iterates: expand `f` and `g` about `lambda^(r)`, maximize the expanded
/// marginal (with `gamma` at its conditional mode) inside the trust region,
/// and move there, until the relative step drops below `stop_tol`.
pub fn find_mode<P: GaussianProblem + ?Sized, R: Rng + ?Sized>(
    problem: &P,
    prior: &GammaPrior,
    lambda_init: f64,
    config: &ModeConfig,
    rng: &mut R,
) -> Result<ModeResult> {
    if !(lambda_init > 0.0) || !lambda_init.is_finite() {
        return Err(Error::Domain(format!(
            "initial lambda must be positive, got {lambda_init}"
        )));
    }
    prior.validate()?;
    let (shape, e_lambda) = exponents(problem.data_dim(), problem.latent_dim(), prior);
    let mut lambda = lambda_init;
    let mut iterates = vec![lambda];
    let mut solves = 0;
    let mut tol = config.search_trust_tol;
    let mut last_step = 0.0f64;
    let mut damping = 1.0;
    for _ in 0..config.max_outer {
        let solver = SystemSolver::new(problem, lambda, config.expansion.solver);
        let f = taylor_f(&solver, config.expansion.order)?;
        let g = taylor_g(&solver, config.expansion.order, config.expansion.trace, rng)?;
        solves += solver.solve_count();
        let objective = |l: f64| profile(shape, e_lambda, prior, l, f.eval(l), g.eval(l)).0;
        let gamma_ref = profile(shape, e_lambda, prior, lambda, f.eval(lambda), 0.0).1;
        let rho = damping * g.trust_radius(2.0 * tol).min(f.trust_radius(2.0 * tol / gamma_ref));
        // On flat marginals the truncation error can outweigh the signal, so
        // only search downhill of the exact slope at the center.
        let rate = 0.5 * f.eval(lambda) + prior.beta_gamma + prior.beta_delta * lambda;
        let slope = -(shape - 1.0) * (0.5 * f.coefficients[0] + prior.beta_delta) / rate + e_lambda / lambda
            - 0.5 * g.coefficients[0];
        let next = if slope >= 0.0 {
            maximize_on(objective, lambda, lambda + rho)
        } else {
            maximize_on(objective, lambda - rho, lambda)
        };
        iterates.push(next);
        // Reversals mean the step is at the noise or truncation floor.
        if (next - lambda) * last_step < 0.0 {
            tol *= 0.1;
            damping *= 0.5;
        }
        last_step = next - lambda;
        let step = (next - lambda).abs() / lambda;
        lambda = next;
        if step < config.stop_tol {
            let gamma = profile(shape, e_lambda, prior, lambda, f.eval(lambda), 0.0).1;
            return Ok(ModeResult {
                lambda,
                gamma,
                solves,
                iterates,
                f,
                g,
            });
        }
    }
    Err(Error::ModeSearch { iterates })
}

/// Scan then golden-section refine on `[lo, hi]`.
fn maximize_on(obj: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let k = 200;
    let h = (hi - lo) / k as f64;
    let mut best = (f64::NEG_INFINITY, lo);
    for i in 0..=k {
        let x = lo + h * i as f64;
        let v = obj(x);
        if v > best.0 {
            best = (v, x);
        }
    }
    let a = (best.1 - h).max(lo);
    let b = (best.1 + h).min(hi);
    crate::samplers::golden_max(&obj, a, b, 1e-12)
}
