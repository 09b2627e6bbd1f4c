//! Metropolis-within-Gibbs over `(gamma, lambda)` driven by local Taylor
//! expansions of `f` and `g`.

use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::mode::{exponents, profile, ExpansionConfig};
use super::solver::SystemSolver;
use super::taylor::{taylor_f, taylor_g, TaylorExpansion};
use crate::error::{Error, Result};
use crate::problem::GaussianProblem;
use crate::rng::{self, RngStream};
use crate::samplers::{Chain, ChainRng, GammaPrior, Hyper, HyperPrior};

/// One expansion center with the offset that places its `g` increments on a
/// common scale with the first center.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionCenter {
    pub f: TaylorExpansion,
    pub g: TaylorExpansion,
    /// Estimate of `g(center) - g(first center)`.
    pub g_offset: f64,
    pub radius: f64,
}

/// Piecewise expansions of `f` and `g` plus what is needed to add centers.
pub struct ExpansionSet<'a, P: GaussianProblem + ?Sized> {
    problem: Option<&'a P>,
    dims: (usize, usize),
    prior: GammaPrior,
    config: ExpansionConfig,
    centers: Vec<ExpansionCenter>,
    probe_rng: RngStream,
    solves: usize,
    warned: bool,
}

impl<'a, P: GaussianProblem + ?Sized> ExpansionSet<'a, P> {
    /// Expands about `lambda0`. Probe vectors come from the probe stream of
    /// `seed`.
    pub fn new(problem: &'a P, prior: GammaPrior, config: ExpansionConfig, lambda0: f64, seed: u64) -> Result<Self> {
        prior.validate()?;
        let mut set = Self {
            problem: Some(problem),
            dims: (problem.data_dim(), problem.latent_dim()),
            prior,
            config,
            centers: Vec::new(),
            probe_rng: rng::stream(seed, rng::PROBE_STREAM),
            solves: 0,
            warned: false,
        };
        let (f, g) = set.expand(lambda0)?;
        set.push(f, g, 0.0);
        Ok(set)
    }

    /// Uses stored expansions only; no centers can be added. `dims` is
    /// `(data_dim, latent_dim)`.
    pub fn from_expansions(
        f: TaylorExpansion,
        g: TaylorExpansion,
        dims: (usize, usize),
        prior: GammaPrior,
        config: ExpansionConfig,
    ) -> Result<Self> {
        prior.validate()?;
        if f.center != g.center || f.value_at_center.is_none() {
            return Err(Error::Parameter(
                "expansions of f and g must share a center and f needs its value".into(),
            ));
        }
        let mut set = Self {
            problem: None,
            dims,
            prior,
            config,
            centers: Vec::new(),
            probe_rng: rng::stream(0, rng::PROBE_STREAM),
            solves: 0,
            warned: false,
        };
        set.push(f, g, 0.0);
        Ok(set)
    }

    fn expand(&mut self, lambda: f64) -> Result<(TaylorExpansion, TaylorExpansion)> {
        let problem = self
            .problem
            .ok_or_else(|| Error::Parameter("no problem attached".into()))?;
        let solver = SystemSolver::new(problem, lambda, self.config.solver);
        let f = taylor_f(&solver, self.config.order)?;
        let g = taylor_g(&solver, self.config.order, self.config.trace, &mut self.probe_rng)?;
        self.solves += solver.solve_count();
        Ok((f, g))
    }

    fn push(&mut self, f: TaylorExpansion, g: TaylorExpansion, g_offset: f64) {
        let (shape, e_lambda) = exponents(self.dims.0, self.dims.1, &self.prior);
        let c = f.center;
        let gamma_ref = profile(shape, e_lambda, &self.prior, c, f.eval(c), 0.0).1;
        let tol = self.config.trust_tol;
        let radius = g.trust_radius(2.0 * tol).min(f.trust_radius(2.0 * tol / gamma_ref));
        self.centers.push(ExpansionCenter { f, g, g_offset, radius });
    }

    pub fn centers(&self) -> &[ExpansionCenter] {
        &self.centers
    }

    pub fn solves(&self) -> usize {
        self.solves
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn prior(&self) -> &GammaPrior {
        &self.prior
    }

    fn nearest(&self, lambda: f64) -> usize {
        let score = |c: &ExpansionCenter| (lambda - c.f.center).abs() / c.radius;
        (0..self.centers.len())
            .min_by(|&a, &b| score(&self.centers[a]).total_cmp(&score(&self.centers[b])))
            .expect("at least one center")
    }

    fn covers(&self, i: usize, lambda: f64) -> bool {
        (lambda - self.centers[i].f.center).abs() <= self.centers[i].radius
    }

    /// Adds centers, each on the trust boundary of its predecessor, until
    /// `lambda` is covered or the center budget is spent. Returns whether
    /// `lambda` ends up covered.
    pub fn ensure(&mut self, lambda: f64) -> Result<bool> {
        loop {
            let i = self.nearest(lambda);
            if self.covers(i, lambda) {
                return Ok(true);
            }
            if self.problem.is_none() || self.centers.len() >= self.config.max_centers {
                if !self.warned {
                    log::warn!(
                        "lambda = {lambda:e} lies outside the trusted range of the expansions; such proposals are rejected"
                    );
                    self.warned = true;
                }
                return Ok(false);
            }
            let c = &self.centers[i];
            let step = c.radius.copysign(lambda - c.f.center);
            let new_center = c.f.center + step;
            let offset = c.g_offset + c.g.increment(step);
            log::info!("re-expanding about lambda = {new_center:e}");
            let (f, g) = self.expand(new_center)?;
            self.push(f, g, offset);
        }
    }

    /// `f(lambda)` from the nearest expansion.
    pub fn f(&self, lambda: f64) -> f64 {
        self.centers[self.nearest(lambda)].f.eval(lambda)
    }

    /// `g(lambda) - g(first center)` from the nearest expansion.
    pub fn g(&self, lambda: f64) -> f64 {
        let c = &self.centers[self.nearest(lambda)];
        c.g_offset + c.g.increment(lambda - c.g.center)
    }

    /// `log pi(gamma, delta | y)` up to a constant, from the expansions.
    pub fn log_marginal(&self, h: Hyper) -> f64 {
        let (m, n) = self.dims;
        let lambda = h.lambda();
        0.5 * (m as f64 - n as f64) * h.gamma.ln() + 0.5 * n as f64 * h.delta.ln()
            - 0.5 * self.g(lambda)
            - 0.5 * h.gamma * self.f(lambda)
            + self.prior.log_density(h)
    }

    fn log_lambda_conditional(&self, gamma: f64, lambda: f64) -> f64 {
        let (_, e_lambda) = exponents(self.dims.0, self.dims.1, &self.prior);
        e_lambda * lambda.ln()
            - 0.5 * self.g(lambda)
            - 0.5 * gamma * self.f(lambda)
            - self.prior.beta_delta * gamma * lambda
    }
}

/// Draws `gamma | lambda, y` exactly, then takes one random-walk Metropolis
/// step of width `w3` on `lambda | gamma, y`. Returns the new state and the
/// `lambda` acceptance. Proposals the expansions cannot cover within the
/// center budget are rejected, so the chain targets the posterior truncated
/// to the trusted range.
pub fn mwg_nonperiodic_step<P: GaussianProblem + ?Sized>(
    theta: Hyper,
    set: &mut ExpansionSet<'_, P>,
    w3: f64,
    rng: &mut ChainRng,
) -> Result<(Hyper, bool)> {
    if !(w3 >= 0.0) || !w3.is_finite() {
        return Err(Error::Parameter(format!(
            "lambda proposal width must be nonnegative, got {w3}"
        )));
    }
    let lambda = theta.lambda();
    set.ensure(lambda)?;
    let prior = set.prior;
    let (shape, _) = exponents(set.dims.0, set.dims.1, &prior);
    let rate = 0.5 * set.f(lambda) + prior.beta_gamma + prior.beta_delta * lambda;
    if !(rate > 0.0) {
        return Err(Error::Domain(format!(
            "nonpositive Gamma rate {rate} at lambda = {lambda:e}"
        )));
    }
    let gamma = Gamma::new(shape, 1.0 / rate)
        .map_err(|e| Error::Parameter(e.to_string()))?
        .sample(&mut rng.proposal);
    let step: f64 = rng.proposal.sample(StandardNormal);
    let u: f64 = rng.proposal.random();
    let stay = Hyper {
        gamma,
        delta: gamma * lambda,
    };
    let cand = lambda + w3 * step;
    if !(cand > 0.0) {
        return Ok((stay, false));
    }
    if !set.ensure(cand)? {
        return Ok((stay, false));
    }
    let log_alpha = set.log_lambda_conditional(gamma, cand) - set.log_lambda_conditional(gamma, lambda);
    if u.ln() < log_alpha {
        Ok((
            Hyper {
                gamma,
                delta: gamma * cand,
            },
            true,
        ))
    } else {
        Ok((stay, false))
    }
}

/// Runs `steps` Metropolis-within-Gibbs transitions from `init`.
pub fn run_mwg_chain<P: GaussianProblem + ?Sized>(
    set: &mut ExpansionSet<'_, P>,
    init: Hyper,
    steps: usize,
    w3: f64,
    seed: u64,
) -> Result<Chain> {
    if steps == 0 {
        return Err(Error::Parameter("a chain needs at least one step".into()));
    }
    let init = Hyper::new(init.gamma, init.delta)?;
    let mut rng = ChainRng::new(seed);
    let mut chain = Chain {
        states: Vec::with_capacity(steps + 1),
        accepted: Vec::with_capacity(steps),
        log_density: Vec::with_capacity(steps + 1),
        wall_time: 0.0,
        transitions: steps,
        accept_count: 0,
        thinning: 1,
    };
    chain.states.push(init);
    chain.log_density.push(set.log_marginal(init));
    let mut h = init;
    for _ in 0..steps {
        let t = Instant::now();
        let (next, acc) = mwg_nonperiodic_step(h, set, w3, &mut rng)?;
        chain.wall_time += t.elapsed().as_secs_f64();
        h = next;
        chain.accept_count += usize::from(acc);
        chain.states.push(h);
        chain.accepted.push(acc);
        chain.log_density.push(set.log_marginal(h));
    }
    Ok(chain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonperiodic::TraceMethod;
    use crate::problem::DeblurProblem;
    use crate::synth::{generate, SynthSpec};

    fn toy() -> DeblurProblem {
        let mut spec = SynthSpec::periodic(12, Some(200.0), 4);
        spec.border = Some(3);
        generate(&spec).unwrap().problem().unwrap()
    }

    fn config() -> ExpansionConfig {
        ExpansionConfig {
            trace: TraceMethod::Exact,
            ..Default::default()
        }
    }

    #[test]
    fn zero_width_accepts_and_keeps_lambda() {
        let p = toy();
        let mut set = ExpansionSet::new(&p, GammaPrior::default(), config(), 0.05, 1).unwrap();
        let mut rng = ChainRng::new(2);
        let mut h = Hyper::new(100.0, 5.0).unwrap();
        for _ in 0..50 {
            let (next, acc) = mwg_nonperiodic_step(h, &mut set, 0.0, &mut rng).unwrap();
            assert!(acc);
            assert!((next.lambda() - 0.05).abs() < 1e-12);
            h = next;
        }
        assert_eq!(set.centers().len(), 1);
    }

    #[test]
    fn center_budget_is_respected() {
        let p = toy();
        let mut cfg = config();
        cfg.max_centers = 2;
        let mut set = ExpansionSet::new(&p, GammaPrior::default(), cfg, 0.05, 1).unwrap();
        set.ensure(50.0).unwrap();
        assert!(set.centers().len() <= 2);
        assert!(set.centers()[0].g_offset == 0.0);
    }

    #[test]
    fn chain_is_deterministic() {
        let p = toy();
        let run = || {
            let mut set = ExpansionSet::new(&p, GammaPrior::default(), config(), 0.05, 1).unwrap();
            run_mwg_chain(&mut set, Hyper::new(100.0, 5.0).unwrap(), 40, 0.005, 9).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.len(), 41);
    }

    #[test]
    fn expansion_offsets_track_exact_g() {
        // g differences across two centers agree with separate expansions
        let p = toy();
        let mut set = ExpansionSet::new(&p, GammaPrior::default(), config(), 0.05, 1).unwrap();
        let r = set.centers()[0].radius;
        set.ensure(0.05 + 1.5 * r).unwrap();
        assert_eq!(set.centers().len(), 2);
        let c1 = &set.centers()[1];
        let near = c1.f.center;
        let direct = set.centers()[0].g.increment(near - 0.05);
        assert!((c1.g_offset - direct).abs() < 1e-2, "{} vs {direct}", c1.g_offset);
        assert!(mwg_nonperiodic_step(Hyper::new(1.0, 0.05).unwrap(), &mut set, -1.0, &mut ChainRng::new(0)).is_err());
    }
}
