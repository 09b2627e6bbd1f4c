use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::hyper::{Hyper, HyperPrior};
use super::posterior::{MarginalEval, PeriodicPosterior};
use super::steps::{
    gibbs_step, mtc_option1_step, mtc_option2_step, oneblock_step, ChainRng, FieldState, GaussianRandomWalk, ThetaState,
};
use crate::error::{Error, Result};
use crate::grid::ImageGrid;

/// Which transition kernel a chain runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "kebab-case")]
pub enum SamplerKind {
    Gibbs,
    OneBlock { widths: GaussianRandomWalk },
    MtcOption1 { widths: GaussianRandomWalk },
    MtcOption2 { w2: f64 },
}

impl SamplerKind {
    pub fn name(&self) -> &'static str {
        match self {
            SamplerKind::Gibbs => "gibbs",
            SamplerKind::OneBlock { .. } => "oneblock",
            SamplerKind::MtcOption1 { .. } => "mtc1",
            SamplerKind::MtcOption2 { .. } => "mtc2",
        }
    }

    /// 60 for block Gibbs, 20 otherwise.
    pub fn default_burn_in(&self) -> usize {
        match self {
            SamplerKind::Gibbs => 60,
            _ => 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub kind: SamplerKind,
    pub steps: usize,
    /// Record every `thinning`-th state.
    pub thinning: usize,
    pub seed: u64,
    /// Series tolerance for MTC Option 2. Option 1 evaluates `f`, `g` exactly.
    pub eps: f64,
}

impl ChainConfig {
    pub fn new(kind: SamplerKind, steps: usize, seed: u64) -> Self {
        Self {
            kind,
            steps,
            thinning: 1,
            seed,
            eps: 1e-6,
        }
    }
}

/// Recorded hyperparameter states of one run. `states[0]` is the initial
/// state; `accepted[i]` belongs to the transition that produced `states[i+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub states: Vec<Hyper>,
    pub accepted: Vec<bool>,
    /// Log marginal density (exact `f`, `g` unless Option 2) at each state.
    pub log_density: Vec<f64>,
    /// Seconds spent in transitions, excluding bookkeeping.
    pub wall_time: f64,
    /// Transitions run, counting thinned-out ones.
    pub transitions: usize,
    pub accept_count: usize,
    pub thinning: usize,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.transitions == 0 {
            0.0
        } else {
            self.accept_count as f64 / self.transitions as f64
        }
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.states.iter().map(|h| h.gamma).collect()
    }

    pub fn deltas(&self) -> Vec<f64> {
        self.states.iter().map(|h| h.delta).collect()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.states.iter().map(|h| h.lambda()).collect()
    }

    /// Drops the first `burn_in` recorded states.
    pub fn after_burn_in(&self, burn_in: usize) -> &[Hyper] {
        &self.states[burn_in.min(self.states.len())..]
    }

    /// CSV with header `iter,gamma,delta,lambda,accepted,logdensity`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,gamma,delta,lambda,accepted,logdensity\n");
        for (i, h) in self.states.iter().enumerate() {
            let acc = if i == 0 { true } else { self.accepted[i - 1] };
            out.push_str(&format!(
                "{},{:e},{:e},{:e},{},{:e}\n",
                i * self.thinning,
                h.gamma,
                h.delta,
                h.lambda(),
                u8::from(acc),
                self.log_density[i]
            ));
        }
        out
    }

    /// Parses [`to_csv`](Self::to_csv) output. Timing is not stored in the
    /// CSV and comes back as zero.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or(Error::EmptySeries)?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let find = |name: &str| {
            cols.iter()
                .position(|c| *c == name)
                .ok_or_else(|| Error::Format(format!("chain CSV has no `{name}` column")))
        };
        let (ii, gi, di, ai, li) = (
            find("iter")?,
            find("gamma")?,
            find("delta")?,
            find("accepted")?,
            find("logdensity")?,
        );
        let mut chain = Chain {
            states: Vec::new(),
            accepted: Vec::new(),
            log_density: Vec::new(),
            wall_time: 0.0,
            transitions: 0,
            accept_count: 0,
            thinning: 1,
        };
        let mut iters = Vec::new();
        for (k, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let num = |i: usize| -> Result<f64> {
                fields
                    .get(i)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| Error::Format(format!("bad field {i} on data row {}", k + 1)))
            };
            iters.push(num(ii)? as usize);
            chain.states.push(Hyper::new(num(gi)?, num(di)?)?);
            chain.log_density.push(num(li)?);
            if k > 0 {
                let acc = num(ai)? != 0.0;
                chain.accepted.push(acc);
                chain.accept_count += usize::from(acc);
            }
        }
        if chain.states.is_empty() {
            return Err(Error::EmptySeries);
        }
        if iters.len() > 1 {
            chain.thinning = (iters[1] - iters[0]).max(1);
        }
        chain.transitions = chain.accepted.len();
        Ok(chain)
    }
}

/// Runs `config.steps` transitions from `init`. Deterministic given the seed.
pub fn run_chain<P: HyperPrior>(post: &PeriodicPosterior<P>, config: &ChainConfig, init: Hyper) -> Result<Chain> {
    if config.steps == 0 {
        return Err(Error::Parameter("a chain needs at least one step".into()));
    }
    if config.thinning == 0 {
        return Err(Error::Parameter("thinning must be at least 1".into()));
    }
    let init = Hyper::new(init.gamma, init.delta)?;
    let mut rng = ChainRng::new(config.seed);
    let cap = config.steps / config.thinning + 1;
    let mut chain = Chain {
        states: Vec::with_capacity(cap),
        accepted: Vec::with_capacity(cap),
        log_density: Vec::with_capacity(cap),
        wall_time: 0.0,
        transitions: config.steps,
        accept_count: 0,
        thinning: config.thinning,
    };
    let fast = MarginalEval::Fast { eps: config.eps };
    let record = |chain: &mut Chain, step: usize, h: Hyper, ld: f64, acc: bool| {
        chain.accept_count += usize::from(acc);
        if step.is_multiple_of(config.thinning) {
            chain.states.push(h);
            chain.log_density.push(ld);
            chain.accepted.push(acc);
        }
    };
    match config.kind {
        SamplerKind::MtcOption1 { widths } => {
            let mut state = ThetaState::new(post, init, MarginalEval::Direct)?;
            chain.states.push(init);
            chain.log_density.push(state.log_density);
            for step in 1..=config.steps {
                let t = Instant::now();
                let (next, acc) = mtc_option1_step(post, &state, &widths, MarginalEval::Direct, &mut rng)?;
                chain.wall_time += t.elapsed().as_secs_f64();
                state = next;
                record(&mut chain, step, state.hyper, state.log_density, acc);
            }
        }
        SamplerKind::MtcOption2 { w2 } => {
            let mut state = ThetaState::new(post, init, fast)?;
            chain.states.push(init);
            chain.log_density.push(state.log_density);
            for step in 1..=config.steps {
                let t = Instant::now();
                let (next, acc) = mtc_option2_step(post, &state, w2, fast, &mut rng)?;
                chain.wall_time += t.elapsed().as_secs_f64();
                state = next;
                record(&mut chain, step, state.hyper, state.log_density, acc);
            }
        }
        SamplerKind::OneBlock { widths } => {
            let t = Instant::now();
            let mut state = FieldState::draw(post, init, &mut rng);
            chain.wall_time += t.elapsed().as_secs_f64();
            chain.states.push(init);
            chain.log_density.push(state.log_density);
            for step in 1..=config.steps {
                let t = Instant::now();
                let (next, acc) = oneblock_step(post, &state, &widths, &mut rng)?;
                chain.wall_time += t.elapsed().as_secs_f64();
                state = next;
                record(&mut chain, step, state.hyper, state.log_density, acc);
            }
        }
        SamplerKind::Gibbs => {
            let mut h = init;
            chain.states.push(init);
            chain.log_density.push(post.log_marginal(init, MarginalEval::Direct)?);
            for step in 1..=config.steps {
                let t = Instant::now();
                let (next, _) = gibbs_step(post, h, &mut rng)?;
                chain.wall_time += t.elapsed().as_secs_f64();
                h = next;
                let ld = if step.is_multiple_of(config.thinning) {
                    post.log_marginal(h, MarginalEval::Direct)?
                } else {
                    f64::NAN
                };
                record(&mut chain, step, h, ld, true);
            }
        }
    }
    Ok(chain)
}

/// Mode of `pi(gamma, delta | y)` for a Gamma hyperprior. `gamma` is
/// profiled out in closed form and the remaining 1-D problem in `log lambda`
/// is scanned and then refined by golden-section search.
pub fn marginal_mode<P: HyperPrior>(post: &PeriodicPosterior<P>, eval: MarginalEval) -> Result<Hyper> {
    let prior = post.prior().as_gamma().ok_or(Error::UnsupportedPrior)?;
    let k = post.delta_exponent() + prior.alpha_gamma + prior.alpha_delta - 2.0;
    if !(k > 0.0) {
        return Err(Error::Parameter("marginal has no interior mode in gamma".into()));
    }
    let e_lambda = post.delta_exponent() + prior.alpha_delta - 1.0;
    let profile = |log_lambda: f64| -> Result<(f64, f64)> {
        let lambda = log_lambda.exp();
        let f = post.f(lambda, eval)?;
        let g = post.g(lambda, eval)?;
        let rate = 0.5 * f + prior.beta_gamma + prior.beta_delta * lambda;
        let gamma = k / rate;
        Ok((k * gamma.ln() - k + e_lambda * lambda.ln() - 0.5 * g, gamma))
    };
    let z = post.cache().z();
    let zmin = z.iter().copied().find(|v| *v > 0.0).unwrap_or(1.0);
    let zmax = z.iter().copied().filter(|v| v.is_finite()).fold(zmin, f64::max);
    let (lo, hi) = ((1e-4 / zmax).ln(), (1e4 / zmin).ln());
    let grid = 400;
    let mut best = (f64::NEG_INFINITY, 0);
    for i in 0..=grid {
        let t = lo + (hi - lo) * i as f64 / grid as f64;
        let (v, _) = profile(t)?;
        if v > best.0 {
            best = (v, i);
        }
    }
    let step = (hi - lo) / grid as f64;
    let t_best = lo + step * best.1 as f64;
    let t = golden_max(
        |t| profile(t).map(|p| p.0).unwrap_or(f64::NEG_INFINITY),
        t_best - step,
        t_best + step,
        1e-10,
    );
    let (_, gamma) = profile(t)?;
    Hyper::new(gamma, gamma * t.exp())
}

pub(crate) fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol * (1.0 + a.abs() + b.abs()) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Proposal widths found by a pilot run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tuning {
    /// 1.8 posterior standard deviations of `gamma` and `delta`.
    pub option1: GaussianRandomWalk,
    /// Angle step adapted toward 44% acceptance.
    pub w2: f64,
    pub pilot_acceptance: f64,
}

/// Pilot MTC Option 2 run from `init`: the first half adapts `w2` toward an
/// acceptance rate of 0.44, the second half runs with it fixed and supplies
/// the standard deviations behind the Option 1 widths.
pub fn tune_proposals<P: HyperPrior>(
    post: &PeriodicPosterior<P>,
    init: Hyper,
    pilot_steps: usize,
    seed: u64,
    eps: f64,
) -> Result<Tuning> {
    if pilot_steps < 200 {
        return Err(Error::Parameter("pilot run needs at least 200 steps".into()));
    }
    let eval = MarginalEval::Fast { eps };
    let mut rng = ChainRng::new(seed);
    let mut state = ThetaState::new(post, init, eval)?;
    let phi = init.angle();
    let mut w2 = 0.05 * phi.min(std::f64::consts::FRAC_PI_2 - phi);
    let batch = 50;
    let adapt = pilot_steps / 2;
    let mut accepted = 0usize;
    let mut round = 0usize;
    for step in 1..=adapt {
        let (next, acc) = mtc_option2_step(post, &state, w2, eval, &mut rng)?;
        state = next;
        accepted += usize::from(acc);
        if step % batch == 0 {
            round += 1;
            let rate = accepted as f64 / batch as f64;
            w2 *= ((rate - 0.44) * 3.0 / (round as f64).sqrt()).exp();
            accepted = 0;
        }
    }
    let mut gammas = Vec::with_capacity(pilot_steps - adapt);
    let mut deltas = Vec::with_capacity(pilot_steps - adapt);
    let mut acc_total = 0usize;
    for _ in adapt..pilot_steps {
        let (next, acc) = mtc_option2_step(post, &state, w2, eval, &mut rng)?;
        state = next;
        acc_total += usize::from(acc);
        gammas.push(state.hyper.gamma);
        deltas.push(state.hyper.delta);
    }
    let sd = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    };
    Ok(Tuning {
        option1: GaussianRandomWalk::new(1.8 * sd(&gammas), 1.8 * sd(&deltas))?,
        w2,
        pilot_acceptance: acc_total as f64 / (pilot_steps - adapt) as f64,
    })
}

/// One conditional image draw per listed state, from the field stream of `seed`.
pub fn draw_images<P: HyperPrior>(post: &PeriodicPosterior<P>, states: &[Hyper], seed: u64) -> Vec<ImageGrid> {
    let mut rng = ChainRng::new(seed);
    states
        .iter()
        .map(|h| post.to_image(&post.draw_conditional_hat(*h, &mut rng.field)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::GammaPrior;
    use crate::synth::{generate, SynthSpec};

    fn toy() -> PeriodicPosterior {
        let out = generate(&SynthSpec::periodic(16, Some(100.0), 3)).unwrap();
        PeriodicPosterior::new(out.model.as_periodic().unwrap(), &out.y, GammaPrior::default()).unwrap()
    }

    fn kinds() -> Vec<SamplerKind> {
        let widths = GaussianRandomWalk::new(10.0, 0.05).unwrap();
        vec![
            SamplerKind::Gibbs,
            SamplerKind::OneBlock { widths },
            SamplerKind::MtcOption1 { widths },
            SamplerKind::MtcOption2 { w2: 0.05 },
        ]
    }

    #[test]
    fn one_step_gives_two_states() {
        let post = toy();
        let init = Hyper::new(80.0, 0.5).unwrap();
        for kind in kinds() {
            let c = run_chain(&post, &ChainConfig::new(kind, 1, 7), init).unwrap();
            assert_eq!(c.len(), 2, "{}", kind.name());
            assert_eq!(c.states[0], init);
        }
    }

    #[test]
    fn same_seed_same_chain() {
        let post = toy();
        let init = Hyper::new(80.0, 0.5).unwrap();
        for kind in kinds() {
            let a = run_chain(&post, &ChainConfig::new(kind, 50, 11), init).unwrap();
            let b = run_chain(&post, &ChainConfig::new(kind, 50, 11), init).unwrap();
            assert_eq!(a.to_csv(), b.to_csv());
            let c = run_chain(&post, &ChainConfig::new(kind, 50, 12), init).unwrap();
            assert_ne!(a.states, c.states);
        }
    }

    #[test]
    fn csv_round_trip_and_thinning() {
        let post = toy();
        let init = Hyper::new(80.0, 0.5).unwrap();
        let mut cfg = ChainConfig::new(SamplerKind::MtcOption2 { w2: 0.05 }, 30, 5);
        cfg.thinning = 3;
        let c = run_chain(&post, &cfg, init).unwrap();
        assert_eq!(c.len(), 11);
        let back = Chain::from_csv(&c.to_csv()).unwrap();
        assert_eq!(back.thinning, 3);
        assert_eq!(back.states.len(), c.states.len());
        for (a, b) in back.states.iter().zip(&c.states) {
            assert!((a.gamma - b.gamma).abs() <= 1e-12 * a.gamma);
        }
        assert_eq!(back.accepted, c.accepted);
    }

    #[test]
    fn bad_configs_are_rejected() {
        let post = toy();
        let init = Hyper::new(80.0, 0.5).unwrap();
        assert!(run_chain(&post, &ChainConfig::new(SamplerKind::Gibbs, 0, 1), init).is_err());
        assert!(Chain::from_csv("").is_err());
        assert!(Chain::from_csv("iter,gamma\n0,1\n").is_err());
    }

    #[test]
    fn mode_beats_its_neighbours() {
        let post = toy();
        let m = marginal_mode(&post, MarginalEval::Direct).unwrap();
        let at = |h: Hyper| post.log_marginal(h, MarginalEval::Direct).unwrap();
        let best = at(m);
        for (sg, sd) in [(1.05, 1.0), (0.95, 1.0), (1.0, 1.05), (1.0, 0.95)] {
            let h = Hyper::new(m.gamma * sg, m.delta * sd).unwrap();
            assert!(at(h) <= best + 1e-9);
        }
    }

    #[test]
    fn tuning_gives_usable_widths() {
        let post = toy();
        let init = marginal_mode(&post, MarginalEval::Direct).unwrap();
        let t = tune_proposals(&post, init, 1000, 3, 1e-6).unwrap();
        assert!(t.w2 > 0.0 && t.option1.w_gamma > 0.0 && t.option1.w_delta > 0.0);
        assert!(
            t.pilot_acceptance > 0.2 && t.pilot_acceptance < 0.7,
            "{}",
            t.pilot_acceptance
        );
        assert!(tune_proposals(&post, init, 10, 3, 1e-6).is_err());
    }
}
