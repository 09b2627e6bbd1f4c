use rand::Rng;
use rand_distr::StandardNormal;

use super::hyper::{GammaPrior, Hyper};
use super::posterior::PeriodicPosterior;
use crate::error::Result;
use crate::grid::ImageGrid;
use crate::nonperiodic::solver::{iterative_solve, IterativeSolverConfig, SystemOperator};
use crate::problem::{DeblurProblem, GaussianProblem};

fn spectral(problem: &DeblurProblem) -> Option<Result<PeriodicPosterior>> {
    problem.model().as_periodic()?;
    if problem.laplacian().boundary() != crate::model::Boundary::Periodic {
        return None;
    }
    Some(PeriodicPosterior::from_problem(problem, GammaPrior::default()))
}

/// Exact draw from `x | theta, y ~ N((A^T A + lambda L)^{-1} A^T y, (gamma A^T A + delta L)^{-1})`
/// by one solve of `(gamma A^T A + delta L) x = gamma A^T y + sqrt(gamma) A^T xi + v2`
/// with `v2` assembled by cliques.
///
/// Periodic problems are solved in the transform domain; otherwise the Krylov
/// solver runs under `config` and the draw is exact up to its tolerance.
pub fn sample_conditional_x<R: Rng + ?Sized>(
    problem: &DeblurProblem,
    hyper: Hyper,
    rng: &mut R,
    config: &IterativeSolverConfig,
) -> Result<ImageGrid> {
    Hyper::new(hyper.gamma, hyper.delta)?;
    if let Some(post) = spectral(problem) {
        let post = post?;
        let xhat = post.draw_conditional_hat(hyper, rng);
        return Ok(post.to_image(&xhat));
    }
    let model = problem.model();
    let xi: Vec<f64> = (0..model.observed_dim()).map(|_| rng.sample(StandardNormal)).collect();
    let mut rhs = vec![0.0; model.latent_dim()];
    model.adjoint_slice(&xi, &mut rhs);
    let sg = hyper.gamma.sqrt();
    for (r, q) in rhs.iter_mut().zip(problem.adjoint_data()) {
        *r = hyper.gamma * q + sg * *r;
    }
    problem.laplacian().add_noise(hyper.delta.sqrt(), rng, &mut rhs);
    // (gamma A^T A + delta L) x = rhs  <=>  (A^T A + lambda L) x = rhs / gamma
    for r in rhs.iter_mut() {
        *r /= hyper.gamma;
    }
    let op = SystemOperator::new(problem, hyper.lambda());
    let out = iterative_solve(&op, &rhs, config, None)?;
    Ok(problem.latent_image(out.solution))
}

/// Conditional mean `(A^T A + lambda L)^{-1} A^T y`.
pub fn conditional_mean(problem: &DeblurProblem, hyper: Hyper, config: &IterativeSolverConfig) -> Result<ImageGrid> {
    Hyper::new(hyper.gamma, hyper.delta)?;
    crate::regularize::solve_gendeconv(problem, hyper.lambda(), config)
}
