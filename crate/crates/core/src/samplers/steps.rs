use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::hyper::{Hyper, HyperPrior};
use super::posterior::{MarginalEval, PeriodicPosterior};
use crate::error::{Error, Result};
use crate::rng::{self, RngStream};

/// The two random streams of a chain: proposals and accept/reject uniforms
/// on one, latent-field noise on the other. Keeping them apart lets
/// algorithms that do and do not draw images see identical proposals.
#[derive(Debug, Clone)]
pub struct ChainRng {
    pub proposal: RngStream,
    pub field: RngStream,
}

impl ChainRng {
    pub fn new(seed: u64) -> Self {
        Self {
            proposal: rng::stream(seed, rng::PROPOSAL_STREAM),
            field: rng::stream(seed, rng::FIELD_STREAM),
        }
    }
}

/// A hyperparameter state with its log marginal density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaState {
    pub hyper: Hyper,
    pub log_density: f64,
    /// `(f, g)` at `hyper.lambda()`, when known.
    fg: Option<(f64, f64)>,
}

impl ThetaState {
    pub fn new<P: HyperPrior>(post: &PeriodicPosterior<P>, hyper: Hyper, eval: MarginalEval) -> Result<Self> {
        let lambda = hyper.lambda();
        let f = post.f(lambda, eval)?;
        let g = post.g(lambda, eval)?;
        Ok(Self {
            hyper,
            log_density: post.log_marginal_from(hyper, f, g),
            fg: Some((f, g)),
        })
    }
}

/// A joint state `(x, theta)` with the image kept as its spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub hyper: Hyper,
    pub xhat: Vec<Complex64>,
    /// `log pi(x, theta | y) - log pi(x | theta, y)`.
    pub log_density: f64,
}

impl FieldState {
    /// Starts from a conditional draw at `hyper`.
    pub fn draw<P: HyperPrior>(post: &PeriodicPosterior<P>, hyper: Hyper, rng: &mut ChainRng) -> Self {
        let xhat = post.draw_conditional_hat(hyper, &mut rng.field);
        let log_density = post.log_joint_over_conditional(hyper, &xhat);
        Self {
            hyper,
            xhat,
            log_density,
        }
    }
}

/// A proposal kernel over `(gamma, delta)`.
pub trait Proposal {
    /// Raw proposed coordinates, possibly outside the positive quadrant.
    fn propose(&self, current: Hyper, rng: &mut RngStream) -> (f64, f64);

    /// `log q(current | proposed) - log q(proposed | current)`.
    fn log_hastings(&self, _current: Hyper, _proposed: Hyper) -> f64 {
        0.0
    }
}

/// Independent Gaussian random-walk steps on `gamma` and `delta`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GaussianRandomWalk {
    pub w_gamma: f64,
    pub w_delta: f64,
}

impl GaussianRandomWalk {
    /// Zero widths are allowed and always propose the current state.
    pub fn new(w_gamma: f64, w_delta: f64) -> Result<Self> {
        if w_gamma >= 0.0 && w_delta >= 0.0 && w_gamma.is_finite() && w_delta.is_finite() {
            Ok(Self { w_gamma, w_delta })
        } else {
            Err(Error::Parameter(format!(
                "proposal widths must be nonnegative, got ({w_gamma}, {w_delta})"
            )))
        }
    }
}

impl Proposal for GaussianRandomWalk {
    fn propose(&self, current: Hyper, rng: &mut RngStream) -> (f64, f64) {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        (current.gamma + self.w_gamma * a, current.delta + self.w_delta * b)
    }
}

fn gamma_draw<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    let dist = Gamma::new(shape, 1.0 / rate)
        .map_err(|e| Error::Parameter(format!("Gamma(shape={shape}, rate={rate}): {e}")))?;
    Ok(dist.sample(rng))
}

/// Proposes, then draws the accept/reject uniform, so that the proposal stream
/// advances identically whatever the outcome.
fn propose_with_uniform(proposal: &dyn Proposal, current: Hyper, rng: &mut RngStream) -> (Option<Hyper>, f64) {
    let (g, d) = proposal.propose(current, rng);
    let u: f64 = rng.random();
    let cand = Hyper { gamma: g, delta: d };
    (cand.is_valid().then_some(cand), u)
}

/// One Metropolis-Hastings step on the marginal `pi(theta | y)`.
pub fn mtc_option1_step<P: HyperPrior>(
    post: &PeriodicPosterior<P>,
    state: &ThetaState,
    proposal: &dyn Proposal,
    eval: MarginalEval,
    rng: &mut ChainRng,
) -> Result<(ThetaState, bool)> {
    let (cand, u) = propose_with_uniform(proposal, state.hyper, &mut rng.proposal);
    let Some(cand) = cand else {
        return Ok((*state, false));
    };
    let next = ThetaState::new(post, cand, eval)?;
    let log_alpha = next.log_density - state.log_density + proposal.log_hastings(state.hyper, cand);
    if u.ln() < log_alpha {
        Ok((next, true))
    } else {
        Ok((*state, false))
    }
}

/// One-block step: propose `theta'`, draw `x' | theta', y`, and accept the
/// pair jointly with the ratio built from the hierarchical densities.
pub fn oneblock_step<P: HyperPrior>(
    post: &PeriodicPosterior<P>,
    state: &FieldState,
    proposal: &dyn Proposal,
    rng: &mut ChainRng,
) -> Result<(FieldState, bool)> {
    let (cand, u) = propose_with_uniform(proposal, state.hyper, &mut rng.proposal);
    let Some(cand) = cand else {
        return Ok((state.clone(), false));
    };
    let xhat = post.draw_conditional_hat(cand, &mut rng.field);
    let log_density = post.log_joint_over_conditional(cand, &xhat);
    let log_alpha = log_density - state.log_density + proposal.log_hastings(state.hyper, cand);
    if u.ln() < log_alpha {
        Ok((
            FieldState {
                hyper: cand,
                xhat,
                log_density,
            },
            true,
        ))
    } else {
        Ok((state.clone(), false))
    }
}

/// Block Gibbs: `x | theta, y`, then `gamma | x, y` and `delta | x`.
///
/// The rate for `delta` is `x^T L x / 2 + beta_delta`, the conjugate update
/// under the prior `x | delta ~ N(0, (delta L)^{-1})`.
pub fn gibbs_step<P: HyperPrior>(
    post: &PeriodicPosterior<P>,
    hyper: Hyper,
    rng: &mut ChainRng,
) -> Result<(Hyper, Vec<Complex64>)> {
    let prior = post.prior().as_gamma().ok_or(Error::UnsupportedPrior)?;
    let xhat = post.draw_conditional_hat(hyper, &mut rng.field);
    let n = post.len() as f64;
    let gamma = gamma_draw(
        n / 2.0 + prior.alpha_gamma,
        0.5 * post.residual_sq(&xhat) + prior.beta_gamma,
        &mut rng.proposal,
    )?;
    let delta = gamma_draw(
        post.delta_exponent() + prior.alpha_delta,
        0.5 * post.seminorm_sq(&xhat) + prior.beta_delta,
        &mut rng.proposal,
    )?;
    Ok((Hyper { gamma, delta }, xhat))
}

/// Metropolis-within-Gibbs in polar coordinates: an exact Gamma draw of
/// `r | phi, y`, then a random-walk step of width `w2` on `phi | r, y`.
/// The returned flag is the `phi` acceptance.
pub fn mtc_option2_step<P: HyperPrior>(
    post: &PeriodicPosterior<P>,
    state: &ThetaState,
    w2: f64,
    eval: MarginalEval,
    rng: &mut ChainRng,
) -> Result<(ThetaState, bool)> {
    let prior = post.prior().as_gamma().ok_or(Error::UnsupportedPrior)?;
    if !(w2 >= 0.0) || !w2.is_finite() {
        return Err(Error::Parameter(format!(
            "angle proposal width must be nonnegative, got {w2}"
        )));
    }
    let phi = state.hyper.angle();
    let (f, g) = match state.fg {
        Some(fg) => fg,
        None => {
            let lambda = state.hyper.lambda();
            (post.f(lambda, eval)?, post.g(lambda, eval)?)
        }
    };
    let (c, s) = (phi.cos(), phi.sin());
    let shape = post.delta_exponent() + prior.alpha_gamma + prior.alpha_delta;
    let rate = 0.5 * c * f + prior.beta_gamma * c + prior.beta_delta * s;
    let r = gamma_draw(shape, rate, &mut rng.proposal)?;
    let h1 = Hyper {
        gamma: r * c,
        delta: r * s,
    };
    let current = ThetaState {
        hyper: h1,
        log_density: post.log_marginal_from(h1, f, g),
        fg: Some((f, g)),
    };
    let step: f64 = rng.proposal.sample(StandardNormal);
    let u: f64 = rng.proposal.random();
    let phi_new = phi + w2 * step;
    if !(phi_new > 0.0 && phi_new < std::f64::consts::FRAC_PI_2) {
        return Ok((current, false));
    }
    let cand = Hyper {
        gamma: r * phi_new.cos(),
        delta: r * phi_new.sin(),
    };
    if !cand.is_valid() {
        return Ok((current, false));
    }
    let next = ThetaState::new(post, cand, eval)?;
    if u.ln() < next.log_density - current.log_density {
        Ok((next, true))
    } else {
        Ok((current, false))
    }
}
