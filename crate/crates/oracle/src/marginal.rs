use nalgebra::{Cholesky, SymmetricEigen};

use crate::{Matrix, OracleError, Result, Vector};

fn check_symmetric(m: &Matrix, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(OracleError::Dimension(format!("{what} is not square")));
    }
    let scale = m.amax().max(1e-300);
    let asym = (m - m.transpose()).amax();
    if asym > 1e-10 * scale {
        return Err(OracleError::NotSymmetric(asym));
    }
    Ok(())
}

fn min_eigen(m: &Matrix) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

/// Linear-Gaussian model `y | x ~ N(A x, Sigma)`, `x ~ N(mu, Q^{-1})`.
#[derive(Debug, Clone)]
pub struct DenseModel {
    pub a: Matrix,
    pub l: Matrix,
    pub sigma: Matrix,
    pub q: Matrix,
    pub mu: Vector,
    pub y: Vector,
}

impl DenseModel {
    /// Checks shapes, symmetry, and semidefiniteness (min eigenvalue at least
    /// `-1e-10` times the largest entry).
    pub fn new(a: Matrix, l: Matrix, sigma: Matrix, q: Matrix, mu: Vector, y: Vector) -> Result<Self> {
        let (m, n) = a.shape();
        if sigma.shape() != (m, m) || q.shape() != (n, n) || l.shape() != (n, n) || mu.len() != n || y.len() != m {
            return Err(OracleError::Dimension(format!("A is {m}x{n}")));
        }
        for (mat, what) in [(&sigma, "Sigma"), (&q, "Q"), (&l, "L")] {
            check_symmetric(mat, what)?;
            let lo = min_eigen(mat);
            if lo < -1e-10 * mat.amax() {
                return Err(OracleError::NotSemidefinite(lo));
            }
        }
        if min_eigen(&sigma) <= 0.0 {
            return Err(OracleError::Singular);
        }
        Ok(Self { a, l, sigma, q, mu, y })
    }

    /// `Sigma = I / gamma`, `Q = delta L`, `mu = 0`.
    pub fn hierarchical(a: &Matrix, l: &Matrix, y: &Vector, gamma: f64, delta: f64) -> Result<Self> {
        let m = a.nrows();
        Self::new(
            a.clone(),
            l.clone(),
            Matrix::identity(m, m) / gamma,
            l * delta,
            Vector::zeros(a.ncols()),
            y.clone(),
        )
    }
}

/// A log density together with whether a pseudo-determinant of `Q` was used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginalValue {
    pub log_density: f64,
    pub pseudo_determinant: bool,
}

fn log_det_spd(m: &Matrix) -> Result<f64> {
    let chol = Cholesky::new(m.clone()).ok_or(OracleError::Singular)?;
    Ok(2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// Log determinant of a PSD matrix, replaced by the log pseudo-determinant
/// (product of eigenvalues above `1e-10` times the largest) when singular.
fn log_det_psd(m: &Matrix) -> (f64, bool) {
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    let cut = 1e-10 * eig.amax();
    let singular = eig.iter().any(|&e| e <= cut);
    (eig.iter().filter(|&&e| e > cut).map(|e| e.ln()).sum(), singular)
}

/// `log pi(theta | y)` from
///
/// ```text
/// sqrt(det(Sigma^{-1}) det(Q) / det(Q + A^T Sigma^{-1} A))
///   * exp(-1/2 r^T (Sigma^{-1} - Sigma^{-1} A (Q + A^T Sigma^{-1} A)^{-1} A^T Sigma^{-1}) r)
/// ```
///
/// with `r = y - A mu`, plus `prior_log_density`, omitting `-(m/2) log 2 pi`.
pub fn log_marginal_general(dense: &DenseModel, prior_log_density: f64) -> Result<MarginalValue> {
    let sigma_inv = Cholesky::new(dense.sigma.clone())
        .ok_or(OracleError::Singular)?
        .inverse();
    let post = &dense.q + dense.a.transpose() * &sigma_inv * &dense.a;
    let post_chol = Cholesky::new(post.clone()).ok_or(OracleError::Singular)?;
    let r = &dense.y - &dense.a * &dense.mu;
    let si_r = &sigma_inv * &r;
    let proj = post_chol.solve(&(dense.a.transpose() * &si_r));
    let quad = r.dot(&si_r) - (dense.a.transpose() * &si_r).dot(&proj);
    let (log_det_q, pseudo) = log_det_psd(&dense.q);
    let log_density =
        0.5 * (log_det_spd(&sigma_inv)? + log_det_q - log_det_spd(&post)?) - 0.5 * quad + prior_log_density;
    Ok(MarginalValue {
        log_density,
        pseudo_determinant: pseudo,
    })
}

/// [`log_marginal_general`] for `Sigma = I/gamma`, `Q = delta (L + nugget I)`.
pub fn hierarchical_log_marginal(
    a: &Matrix,
    l: &Matrix,
    y: &Vector,
    gamma: f64,
    delta: f64,
    nugget: f64,
    prior_log_density: f64,
) -> Result<MarginalValue> {
    let n = l.nrows();
    let lq = l + Matrix::identity(n, n) * nugget;
    log_marginal_general(&DenseModel::hierarchical(a, &lq, y, gamma, delta)?, prior_log_density)
}

/// Mean and covariance of `x | y, theta`.
pub fn conditional_moments(dense: &DenseModel) -> Result<(Vector, Matrix)> {
    let sigma_inv = Cholesky::new(dense.sigma.clone())
        .ok_or(OracleError::Singular)?
        .inverse();
    let post = &dense.q + dense.a.transpose() * &sigma_inv * &dense.a;
    let chol = Cholesky::new(post).ok_or(OracleError::Singular)?;
    let r = &dense.y - &dense.a * &dense.mu;
    let mean = &dense.mu + chol.solve(&(dense.a.transpose() * sigma_inv * r));
    Ok((mean, chol.inverse()))
}

/// Solves `m x = rhs` for symmetric positive definite `m`.
pub fn solve_spd(m: &Matrix, rhs: &Vector) -> Result<Vector> {
    Ok(Cholesky::new(m.clone()).ok_or(OracleError::Singular)?.solve(rhs))
}

/// `tr((B^{-1} L)^r)` for `r = 1..=order`.
pub fn trace_powers(b: &Matrix, l: &Matrix, order: usize) -> Result<Vec<f64>> {
    let chol = Cholesky::new(b.clone()).ok_or(OracleError::Singular)?;
    let m = chol.solve(l);
    let mut p = Matrix::identity(b.nrows(), b.nrows());
    let mut out = Vec::with_capacity(order);
    for _ in 0..order {
        p = &p * &m;
        out.push(p.trace());
    }
    Ok(out)
}

/// `f(lambda) = y^T y - q^T (A^T A + lambda L)^{-1} q` and
/// `g(lambda) = log det(A^T A + lambda L)` through a generalized
/// eigendecomposition of the pencil, so each evaluation is `O(n)`.
#[derive(Debug, Clone)]
pub struct Pencil {
    /// Either `L` or `A^T A` was factored.
    factored_l: bool,
    log_det_base: f64,
    eig: Vec<f64>,
    proj_sq: Vec<f64>,
    yty: f64,
}

impl Pencil {
    /// `ata = A^T A`, `q = A^T y`. Factors whichever of `L`, `A^T A` is
    /// positive definite.
    pub fn new(ata: &Matrix, l: &Matrix, q: &Vector, yty: f64) -> Result<Self> {
        // a singular L can still factor in floating point with a tiny pivot
        let scale = l.diagonal().amax();
        let l_chol = Cholesky::new(l.clone()).filter(|c| c.l().diagonal().iter().all(|d| d * d > 1e-10 * scale));
        let (base, other, factored_l) = match l_chol {
            Some(c) => (c, ata, true),
            None => (Cholesky::new(ata.clone()).ok_or(OracleError::Singular)?, l, false),
        };
        let r_inv_t = base.l().try_inverse().ok_or(OracleError::Singular)?;
        let c = &r_inv_t * other * r_inv_t.transpose();
        let c = (&c + c.transpose()) * 0.5;
        let se = SymmetricEigen::new(c);
        let proj = se.eigenvectors.transpose() * (&r_inv_t * q);
        Ok(Self {
            factored_l,
            log_det_base: 2.0 * base.l().diagonal().iter().map(|d| d.ln()).sum::<f64>(),
            eig: se.eigenvalues.iter().map(|e| e.max(0.0)).collect(),
            proj_sq: proj.iter().map(|p| p * p).collect(),
            yty,
        })
    }

    pub fn from_model(a: &Matrix, l: &Matrix, y: &Vector) -> Result<Self> {
        Self::new(&(a.transpose() * a), l, &(a.transpose() * y), y.dot(y))
    }

    pub fn f(&self, lambda: f64) -> f64 {
        let s: f64 = if self.factored_l {
            // A^T A + lambda L = R^T (C + lambda I) R with L = R^T R.
            self.eig
                .iter()
                .zip(&self.proj_sq)
                .map(|(mu, p)| p / (mu + lambda))
                .sum()
        } else {
            self.eig
                .iter()
                .zip(&self.proj_sq)
                .map(|(z, p)| p / (1.0 + lambda * z))
                .sum()
        };
        self.yty - s
    }

    pub fn g(&self, lambda: f64) -> f64 {
        if self.factored_l {
            self.log_det_base + self.eig.iter().map(|mu| (mu + lambda).ln()).sum::<f64>()
        } else {
            self.log_det_base + self.eig.iter().map(|z| (lambda * z).ln_1p()).sum::<f64>()
        }
    }

    pub fn dim(&self) -> usize {
        self.eig.len()
    }

    /// `(m/2 - n/2) log gamma + e log delta - g/2 - gamma f/2 + prior`, the
    /// marginal density for `Sigma = I/gamma`, `Q = delta L` with the
    /// exponent `e` of `delta` supplied by the caller (`n/2` for proper `L`).
    pub fn log_marginal(&self, m: usize, gamma: f64, delta: f64, delta_exponent: f64, prior_log_density: f64) -> f64 {
        let n = self.dim() as f64;
        let lambda = delta / gamma;
        0.5 * (m as f64 - n) * gamma.ln() + delta_exponent * delta.ln()
            - 0.5 * self.g(lambda)
            - 0.5 * gamma * self.f(lambda)
            + prior_log_density
    }
}

/// Central finite difference of order `k` in `1..=4`, accurate to `O(h^4)`.
pub fn derivative(f: impl Fn(f64) -> f64, x: f64, h: f64, k: usize) -> f64 {
    let v = |j: i32| f(x + j as f64 * h);
    match k {
        1 => (-v(2) + 8.0 * v(1) - 8.0 * v(-1) + v(-2)) / (12.0 * h),
        2 => (-v(2) + 16.0 * v(1) - 30.0 * v(0) + 16.0 * v(-1) - v(-2)) / (12.0 * h * h),
        3 => (-v(3) + 8.0 * v(2) - 13.0 * v(1) + 13.0 * v(-1) - 8.0 * v(-2) + v(-3)) / (8.0 * h.powi(3)),
        4 => {
            (-v(3) + 12.0 * v(2) - 39.0 * v(1) + 56.0 * v(0) - 39.0 * v(-1) + 12.0 * v(-2) - v(-3)) / (6.0 * h.powi(4))
        }
        _ => panic!("derivative order {k} not supported"),
    }
}
