//! Restarted GMRES for matrix-free operators.

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::GaussianProblem;
use crate::sum::{dot, norm};

/// A square linear map applied without assembling a matrix.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], out: &mut [f64]);
}

/// Adapts a closure to [`LinearOperator`].
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}

/// `A^T A + lambda L` for a [`GaussianProblem`].
pub struct SystemOperator<'a, P: GaussianProblem + ?Sized> {
    problem: &'a P,
    lambda: f64,
}

impl<'a, P: GaussianProblem + ?Sized> SystemOperator<'a, P> {
    pub fn new(problem: &'a P, lambda: f64) -> Self {
        Self { problem, lambda }
    }
}

impl<P: GaussianProblem + ?Sized> LinearOperator for SystemOperator<'_, P> {
    fn dim(&self) -> usize {
        self.problem.latent_dim()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.problem.apply_system(self.lambda, x, out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterativeSolverConfig {
    /// Krylov subspace size before restarting.
    pub restart: usize,
    /// Stop when `||b - A x|| <= rel_tol ||b||`.
    pub rel_tol: f64,
    /// Cap on total inner iterations across restarts.
    pub max_iters: usize,
}

impl Default for IterativeSolverConfig {
    fn default() -> Self {
        Self {
            restart: 25,
            rel_tol: 1e-3,
            max_iters: 20_000,
        }
    }
}

impl IterativeSolverConfig {
    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.restart == 0 {
            return Err(Error::Parameter("restart length must be at least 1".into()));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::Parameter(format!(
                "relative tolerance must lie in (0, 1), got {}",
                self.rel_tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub solution: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
}

/// Solves `op x = rhs` by GMRES(`restart`), optionally right-preconditioned
/// by an approximate inverse `precond`.
pub fn iterative_solve(
    op: &dyn LinearOperator,
    rhs: &[f64],
    config: &IterativeSolverConfig,
    precond: Option<&dyn LinearOperator>,
) -> Result<SolveOutcome> {
    config.validate()?;
    let n = op.dim();
    if rhs.len() != n {
        return Err(Error::Dimension {
            expected: (n, 1),
            found: (rhs.len(), 1),
        });
    }
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("right-hand side is not finite".into()));
    }
    let bnorm = norm(rhs);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(SolveOutcome {
            solution: x,
            residual_norm: 0.0,
            iterations: 0,
        });
    }
    let target = config.rel_tol * bnorm;
    let k = config.restart.min(n).max(1);
    let mut total = 0usize;
    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];

    loop {
        op.apply(&x, &mut r);
        for (ri, bi) in r.iter_mut().zip(rhs) {
            *ri = bi - *ri;
        }
        let beta = norm(&r);
        if beta <= target {
            return Ok(SolveOutcome {
                solution: x,
                residual_norm: beta,
                iterations: total,
            });
        }
        if total >= config.max_iters {
            return Err(Error::Convergence {
                iterations: total,
                relative_residual: beta / bnorm,
                best: x,
            });
        }

        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        let mut h = vec![vec![0.0; k]; k + 1];
        let mut cs = vec![0.0; k];
        let mut sn = vec![0.0; k];
        let mut g = vec![0.0; k + 1];
        g[0] = beta;
        let mut used = 0;

        for j in 0..k {
            let vj = &basis[j];
            match precond {
                Some(m) => {
                    m.apply(vj, &mut z);
                    op.apply(&z, &mut w);
                }
                None => op.apply(vj, &mut w),
            }
            // modified Gram-Schmidt, two passes
            for _ in 0..2 {
                for (i, vi) in basis.iter().enumerate() {
                    let hij = dot(&w, vi);
                    h[i][j] += hij;
                    for (wl, vl) in w.iter_mut().zip(vi) {
                        *wl -= hij * vl;
                    }
                }
            }
            let hnext = norm(&w);
            h[j + 1][j] = hnext;
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let denom = h[j][j].hypot(h[j + 1][j]);
            if denom == 0.0 {
                used = j;
                break;
            }
            cs[j] = h[j][j] / denom;
            sn[j] = h[j + 1][j] / denom;
            h[j][j] = denom;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            total += 1;
            used = j + 1;
            let breakdown = hnext <= 1e-14 * beta;
            if g[j + 1].abs() <= target || total >= config.max_iters || breakdown {
                break;
            }
            basis.push(w.iter().map(|v| v / hnext).collect());
        }

        // back substitution on the rotated Hessenberg system
        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let mut s = g[i];
            for l in i + 1..used {
                s -= h[i][l] * y[l];
            }
            y[i] = s / h[i][i];
        }
        let mut update = vec![0.0; n];
        for (yi, vi) in y.iter().zip(&basis) {
            for (u, v) in update.iter_mut().zip(vi) {
                *u += yi * v;
            }
        }
        match precond {
            Some(m) => {
                m.apply(&update, &mut z);
                for (xi, zi) in x.iter_mut().zip(&z) {
                    *xi += zi;
                }
            }
            None => {
                for (xi, ui) in x.iter_mut().zip(&update) {
                    *xi += ui;
                }
            }
        }
        if used == 0 {
            // no progress possible from this residual
            op.apply(&x, &mut r);
            let res = r.iter().zip(rhs).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt();
            return Err(Error::Convergence {
                iterations: total,
                relative_residual: res / bnorm,
                best: x,
            });
        }
    }
}

/// Repeated solves with `A^T A + lambda L`, counting how many were made.
pub struct SystemSolver<'a, P: GaussianProblem + ?Sized> {
    op: SystemOperator<'a, P>,
    config: IterativeSolverConfig,
    solves: AtomicUsize,
}

impl<'a, P: GaussianProblem + ?Sized> SystemSolver<'a, P> {
    pub fn new(problem: &'a P, lambda: f64, config: IterativeSolverConfig) -> Self {
        Self {
            op: SystemOperator::new(problem, lambda),
            config,
            solves: AtomicUsize::new(0),
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.solves.fetch_add(1, Ordering::Relaxed);
        iterative_solve(&self.op, rhs, &self.config, None).map(|o| o.solution)
    }

    pub fn solve_count(&self) -> usize {
        self.solves.load(Ordering::Relaxed)
    }

    pub fn problem(&self) -> &'a P {
        self.op.problem
    }

    pub fn lambda(&self) -> f64 {
        self.op.lambda
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_converges_immediately() {
        let id = FnOperator::new(5, |x: &[f64], out: &mut [f64]| out.copy_from_slice(x));
        let rhs = [1.0, -2.0, 3.0, 0.5, 0.0];
        let out = iterative_solve(&id, &rhs, &IterativeSolverConfig::default(), None).unwrap();
        assert!(out.iterations <= 1);
        for (a, b) in out.solution.iter().zip(&rhs) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let id = FnOperator::new(3, |x: &[f64], out: &mut [f64]| out.copy_from_slice(x));
        let out = iterative_solve(&id, &[0.0; 3], &IterativeSolverConfig::default(), None).unwrap();
        assert_eq!(out.solution, vec![0.0; 3]);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn reports_non_convergence_with_best_iterate() {
        // diag(1..=50) needs more than 3 iterations at 1e-12
        let op = FnOperator::new(50, |x: &[f64], out: &mut [f64]| {
            for (i, (o, v)) in out.iter_mut().zip(x).enumerate() {
                *o = (i + 1) as f64 * v;
            }
        });
        let cfg = IterativeSolverConfig {
            restart: 3,
            rel_tol: 1e-12,
            max_iters: 3,
        };
        match iterative_solve(&op, &[1.0; 50], &cfg, None) {
            Err(Error::Convergence { best, iterations, .. }) => {
                assert_eq!(best.len(), 50);
                assert_eq!(iterations, 3);
            }
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn preconditioner_hook_is_used() {
        let op = FnOperator::new(4, |x: &[f64], out: &mut [f64]| {
            for (i, (o, v)) in out.iter_mut().zip(x).enumerate() {
                *o = 10f64.powi(i as i32) * v;
            }
        });
        let exact_inverse = FnOperator::new(4, |x: &[f64], out: &mut [f64]| {
            for (i, (o, v)) in out.iter_mut().zip(x).enumerate() {
                *o = v / 10f64.powi(i as i32);
            }
        });
        let cfg = IterativeSolverConfig::default().with_rel_tol(1e-12);
        let out = iterative_solve(&op, &[1.0; 4], &cfg, Some(&exact_inverse)).unwrap();
        assert_eq!(out.iterations, 1);
        assert!((out.solution[3] - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_config() {
        let id = FnOperator::new(1, |x: &[f64], out: &mut [f64]| out.copy_from_slice(x));
        let cfg = IterativeSolverConfig {
            restart: 0,
            ..Default::default()
        };
        assert!(iterative_solve(&id, &[1.0], &cfg, None).is_err());
    }
}
