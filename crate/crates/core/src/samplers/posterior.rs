use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::hyper::{GammaPrior, Hyper, HyperPrior};
use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use crate::model::{LaplacianOp, PeriodicModel};
use crate::problem::{DeblurProblem, PeriodicProblem};
use crate::spectral::{self, CumulantTables, SpectralCache, DEFAULT_SERIES_ORDER};
use crate::sum::CompensatedSum;

/// How `f` and `g` are evaluated inside the marginal density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarginalEval {
    /// Exact `O(n)` sums.
    Direct,
    /// Head/tail series with absolute error at most `eps` on each of `f`, `g`.
    Fast { eps: f64 },
}

/// `(n/2) log delta - g(lambda)/2 - gamma f(lambda)/2 + log prior`, with `f`
/// and `g` from the series evaluation at tolerance `eps`.
pub fn log_marginal(
    cache: &SpectralCache,
    tables: &CumulantTables,
    hyper: Hyper,
    prior: &dyn HyperPrior,
    eps: f64,
) -> Result<f64> {
    let lambda = hyper.lambda();
    let f = spectral::f_fast(cache, tables, lambda, eps)?;
    let g = spectral::g_fast(cache, tables, lambda, eps)?;
    Ok(assemble(cache.len() as f64 / 2.0, hyper, f, g, prior))
}

fn assemble(delta_exponent: f64, h: Hyper, f: f64, g: f64, prior: &dyn HyperPrior) -> f64 {
    delta_exponent * h.delta.ln() - 0.5 * g - 0.5 * h.gamma * f + prior.log_density(h)
}

/// Everything needed to evaluate and sample the posterior of the periodic
/// model: transform-domain spectra, the sorted spectral cache and the prior.
#[derive(Debug, Clone)]
pub struct PeriodicPosterior<P = GammaPrior> {
    transform: PeriodicProblem,
    laplacian: LaplacianOp,
    cache: SpectralCache,
    tables: CumulantTables,
    prior: P,
    delta_exponent: f64,
    /// `|Ahat|^2` in DFT order.
    gram: Vec<f64>,
    /// `conj(Ahat) yhat` in DFT order.
    aty_hat: Vec<Complex64>,
}

impl<P: HyperPrior> PeriodicPosterior<P> {
    pub fn new(model: &PeriodicModel, y: &ImageGrid, prior: P) -> Result<Self> {
        Self::with_order(model, y, prior, DEFAULT_SERIES_ORDER)
    }

    /// Uses head/tail series of order `order` for the fast evaluations.
    pub fn with_order(model: &PeriodicModel, y: &ImageGrid, prior: P, order: usize) -> Result<Self> {
        let transform = PeriodicProblem::new(model, y)?;
        let cache = SpectralCache::build(model, y)?;
        let tables = CumulantTables::build(&cache, order)?;
        let (rows, cols) = model.shape();
        let gram = transform.ahat().iter().map(|a| a.norm_sqr()).collect();
        let aty_hat = transform
            .ahat()
            .iter()
            .zip(transform.yhat())
            .map(|(a, y)| a.conj() * y)
            .collect();
        let n = transform.len();
        Ok(Self {
            transform,
            laplacian: LaplacianOp::periodic(rows, cols),
            cache,
            tables,
            prior,
            delta_exponent: n as f64 / 2.0,
            gram,
            aty_hat,
        })
    }

    /// Builds from a problem whose blur and prior are both periodic.
    pub fn from_problem(problem: &DeblurProblem, prior: P) -> Result<Self> {
        let model = problem
            .model()
            .as_periodic()
            .ok_or_else(|| Error::Parameter("the spectral posterior needs the periodic model".into()))?;
        if problem.laplacian().boundary() != crate::model::Boundary::Periodic {
            return Err(Error::Parameter("the spectral posterior needs a periodic prior".into()));
        }
        Self::new(model, problem.data(), prior)
    }

    /// Replaces the exponent of `delta` in the marginal (default `n/2`). The
    /// periodic prior is improper, and a pseudo-determinant reading gives
    /// `(n-1)/2`.
    pub fn with_delta_exponent(mut self, exponent: f64) -> Self {
        self.delta_exponent = exponent;
        self
    }

    pub fn len(&self) -> usize {
        self.gram.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gram.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.transform.shape()
    }

    pub fn cache(&self) -> &SpectralCache {
        &self.cache
    }

    pub fn tables(&self) -> &CumulantTables {
        &self.tables
    }

    pub fn prior(&self) -> &P {
        &self.prior
    }

    pub fn delta_exponent(&self) -> f64 {
        self.delta_exponent
    }

    pub fn transform(&self) -> &PeriodicProblem {
        &self.transform
    }

    pub fn f(&self, lambda: f64, eval: MarginalEval) -> Result<f64> {
        match eval {
            MarginalEval::Direct => spectral::f_direct(&self.cache, lambda),
            MarginalEval::Fast { eps } => spectral::f_fast(&self.cache, &self.tables, lambda, eps),
        }
    }

    pub fn g(&self, lambda: f64, eval: MarginalEval) -> Result<f64> {
        match eval {
            MarginalEval::Direct => spectral::g_direct(&self.cache, lambda),
            MarginalEval::Fast { eps } => spectral::g_fast(&self.cache, &self.tables, lambda, eps),
        }
    }

    /// Log marginal density of `theta` up to a constant fixed by the data.
    pub fn log_marginal(&self, h: Hyper, eval: MarginalEval) -> Result<f64> {
        if !h.is_valid() {
            return Ok(f64::NEG_INFINITY);
        }
        let lambda = h.lambda();
        let f = self.f(lambda, eval)?;
        let g = self.g(lambda, eval)?;
        Ok(self.log_marginal_from(h, f, g))
    }

    /// The marginal density given `f(lambda)` and `g(lambda)` at `lambda = delta/gamma`.
    pub fn log_marginal_from(&self, h: Hyper, f: f64, g: f64) -> f64 {
        assemble(self.delta_exponent, h, f, g, &self.prior)
    }

    /// Per-mode precision `gamma |Ahat|^2 + delta Lhat`, with a nugget on
    /// modes where both vanish.
    fn precision(&self, h: Hyper, k: usize) -> f64 {
        let q = h.gamma * self.gram[k] + h.delta * self.transform.lhat()[k];
        if q > 0.0 {
            q
        } else {
            log::warn!("mode {k} has zero conditional precision; adding a nugget");
            1e-10 * h.delta
        }
    }

    /// Spectrum of the conditional mean `(A^T A + lambda L)^{-1} A^T y`.
    pub fn conditional_mean_hat(&self, h: Hyper) -> Vec<Complex64> {
        (0..self.len())
            .map(|k| h.gamma * self.aty_hat[k] / self.precision(h, k))
            .collect()
    }

    /// Randomize-then-optimize draw from `x | theta, y`, returned as a
    /// spectrum. Consumes `n` normals for the likelihood perturbation, then
    /// one per prior edge.
    pub fn draw_conditional_hat<R: Rng + ?Sized>(&self, h: Hyper, rng: &mut R) -> Vec<Complex64> {
        let n = self.len();
        let fft = self.transform.fft();
        let mut xi: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.sample(StandardNormal), 0.0))
            .collect();
        fft.forward_in_place(&mut xi);
        let mut v2 = vec![0.0; n];
        self.laplacian.add_noise(h.delta.sqrt(), rng, &mut v2);
        let v2hat = fft.forward_real(&v2);
        let sg = h.gamma.sqrt();
        let ahat = self.transform.ahat();
        (0..n)
            .map(|k| {
                let rhs = h.gamma * self.aty_hat[k] + sg * ahat[k].conj() * xi[k] + v2hat[k];
                rhs / self.precision(h, k)
            })
            .collect()
    }

    pub fn to_image(&self, spectrum: &[Complex64]) -> ImageGrid {
        self.transform.to_image(spectrum)
    }

    /// `||A x - y||^2` for `x` given by its spectrum.
    pub fn residual_sq(&self, xhat: &[Complex64]) -> f64 {
        let n = self.len() as f64;
        let ahat = self.transform.ahat();
        let yhat = self.transform.yhat();
        xhat.iter()
            .zip(ahat)
            .zip(yhat)
            .map(|((x, a), y)| (a * x - y).norm_sqr())
            .collect::<CompensatedSum>()
            .value()
            / n
    }

    /// `x^T L x` for `x` given by its spectrum.
    pub fn seminorm_sq(&self, xhat: &[Complex64]) -> f64 {
        let n = self.len() as f64;
        xhat.iter()
            .zip(self.transform.lhat())
            .map(|(x, l)| l * x.norm_sqr())
            .collect::<CompensatedSum>()
            .value()
            / n
    }

    /// `log pi(x, theta | y) - log pi(x | theta, y)` from the hierarchical
    /// factors. Equals [`log_marginal`](Self::log_marginal) with exact `f`, `g`
    /// for every `x`, which is what makes the one-block sampler's
    /// theta-chain a marginal chain.
    pub fn log_joint_over_conditional(&self, h: Hyper, xhat: &[Complex64]) -> f64 {
        let n = self.len();
        let nf = n as f64;
        let mut logdet = CompensatedSum::new();
        let mut quad = CompensatedSum::new();
        for k in 0..n {
            let q = self.precision(h, k);
            logdet.add(q.ln());
            let mu = h.gamma * self.aty_hat[k] / q;
            quad.add(q * (xhat[k] - mu).norm_sqr());
        }
        let log_joint = 0.5 * nf * h.gamma.ln() - 0.5 * h.gamma * self.residual_sq(xhat)
            + self.delta_exponent * h.delta.ln()
            - 0.5 * h.delta * self.seminorm_sq(xhat)
            + self.prior.log_density(h);
        let log_cond = 0.5 * logdet.value() - 0.5 * quad.value() / nf;
        log_joint - log_cond
    }
}
