//! Posterior mean of the image by integrating conditional means against a
//! histogram of `lambda`.

use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use crate::problem::DeblurProblem;
use crate::regularize::solve_gendeconv;

use super::solver::IterativeSolverConfig;

/// `sum_b w_b (A^T A + lambda_b L)^{-1} A^T y`, one solve per bin with
/// positive weight. Weights must be nonnegative and sum to 1.
pub fn posterior_mean(
    problem: &DeblurProblem,
    lambdas: &[f64],
    weights: &[f64],
    config: &IterativeSolverConfig,
) -> Result<ImageGrid> {
    if lambdas.len() != weights.len() || lambdas.is_empty() {
        return Err(Error::Parameter(
            "histogram needs matching, nonempty centers and weights".into(),
        ));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::Parameter("histogram weights must be nonnegative".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Parameter(format!("histogram weights sum to {total}, not 1")));
    }
    let (rows, cols) = problem.model().latent_shape();
    let mut acc = vec![0.0; rows * cols];
    for (&lambda, &w) in lambdas.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        let x = solve_gendeconv(problem, lambda, config)?;
        for (a, v) in acc.iter_mut().zip(x.values()) {
            *a += w * v;
        }
    }
    Ok(problem.latent_image(acc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthSpec};

    fn toy() -> DeblurProblem {
        let mut spec = SynthSpec::periodic(12, Some(200.0), 4);
        spec.border = Some(3);
        generate(&spec).unwrap().problem().unwrap()
    }

    fn cfg() -> IterativeSolverConfig {
        IterativeSolverConfig::default().with_rel_tol(1e-10)
    }

    #[test]
    fn single_bin_is_the_conditional_mean() {
        let p = toy();
        let m = posterior_mean(&p, &[0.05], &[1.0], &cfg()).unwrap();
        let x = solve_gendeconv(&p, 0.05, &cfg()).unwrap();
        assert!(m.rms_diff(&x).unwrap() < 1e-12);
    }

    #[test]
    fn two_bins_average() {
        let p = toy();
        let m = posterior_mean(&p, &[0.01, 0.1, 5.0], &[0.5, 0.5, 0.0], &cfg()).unwrap();
        let a = solve_gendeconv(&p, 0.01, &cfg()).unwrap();
        let b = solve_gendeconv(&p, 0.1, &cfg()).unwrap();
        for ((v, x), y) in m.values().iter().zip(a.values()).zip(b.values()) {
            assert!((v - 0.5 * (x + y)).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_bad_histograms() {
        let p = toy();
        assert!(posterior_mean(&p, &[], &[], &cfg()).is_err());
        assert!(posterior_mean(&p, &[0.1], &[0.5], &cfg()).is_err());
        assert!(posterior_mean(&p, &[0.1, 0.2], &[1.5, -0.5], &cfg()).is_err());
        assert!(posterior_mean(&p, &[0.1], &[1.0, 0.0], &cfg()).is_err());
    }
}
