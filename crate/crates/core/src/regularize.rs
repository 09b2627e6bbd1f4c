//! Generalized deconvolution `(A^T A + lambda L) x = A^T y` and L-curve
//! selection of `lambda`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use crate::nonperiodic::solver::{iterative_solve, IterativeSolverConfig, SystemOperator};
use crate::problem::{DeblurProblem, GaussianProblem, PeriodicProblem};
use crate::spectral::SPECTRAL_ZERO_THRESHOLD;
use crate::sum::norm;

/// Default number of L-curve grid points.
pub const DEFAULT_LCURVE_POINTS: usize = 200;

/// Residual and seminorm of regularized solutions over a `lambda` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LCurve {
    pub lambdas: Vec<f64>,
    /// `||A x_lambda - y||`
    pub residual_norms: Vec<f64>,
    /// `sqrt(x_lambda^T L x_lambda)`
    pub seminorms: Vec<f64>,
    pub corner_index: usize,
}

impl LCurve {
    pub fn corner_lambda(&self) -> f64 {
        self.lambdas[self.corner_index]
    }

    /// CSV with header `lambda,residual,seminorm`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,residual,seminorm\n");
        for ((l, r), s) in self.lambdas.iter().zip(&self.residual_norms).zip(&self.seminorms) {
            out.push_str(&format!("{l:e},{r:e},{s:e}\n"));
        }
        out
    }
}

/// `k` log-spaced points from `lo` to `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    match k {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..k)
                .map(|i| (a + (b - a) * i as f64 / (k - 1) as f64).exp())
                .collect()
        }
    }
}

/// Default grid over `[1e-8, 1e2]` scaled by `||A^T A||_1 / ||L||_1`.
pub fn default_lambda_grid(problem: &DeblurProblem, k: usize) -> Vec<f64> {
    let psf_mass: f64 = problem.model().psf().grid().values().iter().map(|v| v.abs()).sum();
    let scale = psf_mass * psf_mass / 8.0;
    log_spaced(1e-8 * scale, 1e2 * scale, k)
}

fn periodic_solution_hat(pp: &PeriodicProblem, lambda: f64) -> Result<Vec<Complex64>> {
    let max_abs = pp.ahat().iter().map(|a| a.norm()).fold(0.0, f64::max);
    let cutoff = SPECTRAL_ZERO_THRESHOLD * max_abs;
    let mut out = Vec::with_capacity(pp.len());
    for ((a, &l), y) in pp.ahat().iter().zip(pp.lhat()).zip(pp.yhat()) {
        let denom = a.norm_sqr() + lambda * l;
        if a.norm() <= cutoff && lambda * l == 0.0 || denom == 0.0 {
            return Err(Error::Singular(format!("A^T A + {lambda} L has a null mode")));
        }
        out.push(a.conj() * y / denom);
    }
    Ok(out)
}

/// Regularized estimate `x_lambda`. Periodic problems are solved mode by mode
/// in the transform domain; others by restarted GMRES under `config`.
pub fn solve_gendeconv(problem: &DeblurProblem, lambda: f64, config: &IterativeSolverConfig) -> Result<ImageGrid> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("lambda must be nonnegative, got {lambda}")));
    }
    if let Some(pp) = PeriodicProblem::from_problem(problem) {
        let pp = pp?;
        let xh = periodic_solution_hat(&pp, lambda)?;
        return Ok(pp.to_image(&xh));
    }
    let op = SystemOperator::new(problem, lambda);
    let out = iterative_solve(&op, problem.adjoint_data(), config, None)?;
    Ok(problem.latent_image(out.solution))
}

/// One regularized solve per grid point, then the corner. `lambda_grid` must
/// be strictly positive and increasing.
pub fn build_lcurve(problem: &DeblurProblem, lambda_grid: &[f64], config: &IterativeSolverConfig) -> Result<LCurve> {
    if lambda_grid.is_empty() {
        return Err(Error::Parameter("lambda grid is empty".into()));
    }
    if lambda_grid.iter().any(|&l| !(l > 0.0) || !l.is_finite()) || lambda_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parameter(
            "lambda grid must be positive and strictly increasing".into(),
        ));
    }
    let mut residual_norms = Vec::with_capacity(lambda_grid.len());
    let mut seminorms = Vec::with_capacity(lambda_grid.len());
    match PeriodicProblem::from_problem(problem) {
        Some(pp) => {
            let pp = pp?;
            let n = pp.len() as f64;
            for &lambda in lambda_grid {
                let xh = periodic_solution_hat(&pp, lambda)?;
                let mut res = 0.0;
                let mut semi = 0.0;
                for (((x, a), &l), y) in xh.iter().zip(pp.ahat()).zip(pp.lhat()).zip(pp.yhat()) {
                    res += (a * x - y).norm_sqr();
                    semi += l * x.norm_sqr();
                }
                residual_norms.push((res / n).sqrt());
                seminorms.push((semi / n).sqrt());
            }
        }
        None => {
            let model = problem.model();
            for &lambda in lambda_grid {
                let x = solve_gendeconv(problem, lambda, config)?;
                let mut ax = vec![0.0; model.observed_dim()];
                model.forward_slice(x.values(), &mut ax);
                for (a, y) in ax.iter_mut().zip(problem.data().values()) {
                    *a -= y;
                }
                residual_norms.push(norm(&ax));
                seminorms.push(problem.laplacian().quadratic_form(x.values()).sqrt());
            }
        }
    }
    let mut curve = LCurve {
        lambdas: lambda_grid.to_vec(),
        residual_norms,
        seminorms,
        corner_index: 0,
    };
    if curve.lambdas.len() >= 3 {
        curve.corner_index = lcurve_corner(&curve)?.1;
    }
    Ok(curve)
}

/// Point of maximum signed Menger curvature of `(log residual, log seminorm)`
/// over consecutive triples, after dropping points that break monotonicity.
pub fn lcurve_corner(curve: &LCurve) -> Result<(f64, usize)> {
    let k = curve.lambdas.len();
    if k < 3 {
        return Err(Error::Parameter("corner search needs at least 3 points".into()));
    }
    let mut kept: Vec<usize> = Vec::with_capacity(k);
    for i in 0..k {
        let (r, s) = (curve.residual_norms[i], curve.seminorms[i]);
        if !(r > 0.0 && s > 0.0) {
            continue;
        }
        if let Some(&last) = kept.last() {
            if r < curve.residual_norms[last] || s > curve.seminorms[last] {
                continue;
            }
        }
        kept.push(i);
    }
    if kept.len() < 3 {
        return Err(Error::NoCorner);
    }
    let pts: Vec<(f64, f64)> = kept
        .iter()
        .map(|&i| (curve.residual_norms[i].ln(), curve.seminorms[i].ln()))
        .collect();
    let mut best: Option<(f64, usize)> = None;
    for t in 1..pts.len() - 1 {
        let (a, b, c) = (pts[t - 1], pts[t], pts[t + 1]);
        let ab = (b.0 - a.0, b.1 - a.1);
        let bc = (c.0 - b.0, c.1 - b.1);
        let ac = (c.0 - a.0, c.1 - a.1);
        let denom = ab.0.hypot(ab.1) * bc.0.hypot(bc.1) * ac.0.hypot(ac.1);
        if denom == 0.0 {
            continue;
        }
        let kappa = 2.0 * (ab.0 * bc.1 - ab.1 * bc.0) / denom;
        if best.is_none_or(|(bk, _)| kappa > bk) {
            best = Some((kappa, kept[t]));
        }
    }
    match best {
        Some((kappa, idx)) if kappa > 1e-12 => Ok((curve.lambdas[idx], idx)),
        _ => Err(Error::NoCorner),
    }
}
