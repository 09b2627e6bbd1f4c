//! Taylor expansions of `f` and `g` in the increment `lambda - lambda0`.
//!
//! With `B = A^T A + lambda0 L` and `q = A^T y`,
//!
//! ```text
//! f^(r)(lambda0) / r! = (-1)^(r+1) q^T (B^{-1} L)^r B^{-1} q
//! g(lambda) - g(lambda0) = sum_r (-1)^(r+1) tr((B^{-1} L)^r) (lambda - lambda0)^r / r
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::hutchinson::{exact_traces, hutchinson_traces, TraceMethod};
use super::solver::SystemSolver;
use crate::error::{Error, Result};
use crate::problem::GaussianProblem;
use crate::sum::dot;

/// Truncated series `sum_{r=1..s} c_r (lambda - center)^r`, optionally with
/// the value at the center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorExpansion {
    pub center: f64,
    /// `c_1..c_s`; the constant term is kept apart in `value_at_center`.
    pub coefficients: Vec<f64>,
    /// Monte Carlo standard errors of the coefficients (zero when exact).
    pub std_errors: Vec<f64>,
    /// Trace probes used, 0 for expansions of `f`.
    pub probes: usize,
    /// `f(center)`; absent for `g`, whose expansions are only used through
    /// differences.
    pub value_at_center: Option<f64>,
}

impl TaylorExpansion {
    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    /// `sum_r c_r delta^r`; zero at `delta = 0`.
    pub fn increment(&self, delta: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, c| (acc + c) * delta)
    }

    /// Value at `lambda`, using `value_at_center` (or 0) as the constant term.
    pub fn eval(&self, lambda: f64) -> f64 {
        self.value_at_center.unwrap_or(0.0) + self.increment(lambda - self.center)
    }

    /// Rough size of the first omitted coefficient, extrapolated from the
    /// ratio of the last two.
    pub fn error_scale(&self) -> f64 {
        let s = self.coefficients.len();
        match s {
            0 => 0.0,
            1 => self.coefficients[0].abs(),
            _ => {
                let (a, b) = (self.coefficients[s - 2], self.coefficients[s - 1]);
                if a == 0.0 {
                    b.abs()
                } else {
                    b.abs() * (b / a).abs()
                }
            }
        }
    }

    /// Radius `rho` with `|c_s| rho^s = tol`, capped at half the center (the
    /// series in `lambda - center` diverges beyond `center`).
    pub fn trust_radius(&self, tol: f64) -> f64 {
        let s = self.coefficients.len();
        let cap = 0.5 * self.center;
        match self.coefficients.last() {
            Some(&c) if c != 0.0 => (tol / c.abs()).powf(1.0 / s as f64).min(cap),
            _ => cap,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let exp: Self = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        if !(exp.center > 0.0) || exp.std_errors.len() != exp.coefficients.len() {
            return Err(Error::Format("inconsistent expansion record".into()));
        }
        Ok(exp)
    }
}

fn l_apply<P: GaussianProblem + ?Sized>(p: &P) -> impl Fn(&[f64], &mut [f64]) + '_ {
    move |x, out| p.apply_precision(x, out)
}

/// Expansion of `f` about `solver.lambda()`. Uses `order/2 + 1` solves
/// (three for a quartic) by pairing `u_a^T L u_b` with `u_k = (B^{-1} L)^k B^{-1} q`.
pub fn taylor_f<P: GaussianProblem + ?Sized>(solver: &SystemSolver<'_, P>, order: usize) -> Result<TaylorExpansion> {
    if order == 0 {
        return Err(Error::Parameter("expansion order must be at least 1".into()));
    }
    let lambda0 = solver.lambda();
    if !(lambda0 > 0.0) {
        return Err(Error::Domain(format!(
            "expansion center must be positive, got {lambda0}"
        )));
    }
    let p = solver.problem();
    let q = p.adjoint_data();
    let k = order / 2;
    let mut u = vec![solver.solve(q)?];
    let mut lu = Vec::with_capacity(k + 1);
    for j in 0..=k {
        let mut l = vec![0.0; q.len()];
        p.apply_precision(&u[j], &mut l);
        if j < k {
            u.push(solver.solve(&l)?);
        }
        lu.push(l);
    }
    let coefficients = (1..=order)
        .map(|r| {
            let a = (r - 1) / 2;
            let b = r - 1 - a;
            let sign = if r % 2 == 1 { 1.0 } else { -1.0 };
            sign * dot(&u[a], &lu[b])
        })
        .collect();
    Ok(TaylorExpansion {
        center: lambda0,
        coefficients,
        std_errors: vec![0.0; order],
        probes: 0,
        value_at_center: Some(p.data_norm_sq() - dot(q, &u[0])),
    })
}

/// Expansion of `g` about `solver.lambda()` with traces from `method`. Uses
/// `probes * order` solves for Hutchinson traces.
pub fn taylor_g<P: GaussianProblem + ?Sized, R: Rng + ?Sized>(
    solver: &SystemSolver<'_, P>,
    order: usize,
    method: TraceMethod,
    rng: &mut R,
) -> Result<TaylorExpansion> {
    if order == 0 {
        return Err(Error::Parameter("expansion order must be at least 1".into()));
    }
    let lambda0 = solver.lambda();
    if !(lambda0 > 0.0) {
        return Err(Error::Domain(format!(
            "expansion center must be positive, got {lambda0}"
        )));
    }
    let p = solver.problem();
    let dim = p.latent_dim();
    let mut solve = |x: &[f64]| solver.solve(x);
    let lap = l_apply(p);
    let traces = match method {
        TraceMethod::Hutchinson { probes } => hutchinson_traces(&mut solve, &lap, dim, order, probes, rng)?,
        TraceMethod::Exact => exact_traces(&mut solve, &lap, dim, order)?,
    };
    let mut coefficients = Vec::with_capacity(order);
    let mut std_errors = Vec::with_capacity(order);
    for r in 1..=order {
        let sign = if r % 2 == 1 { 1.0 } else { -1.0 };
        coefficients.push(sign * traces.values[r - 1] / r as f64);
        std_errors.push(traces.std_errors[r - 1] / r as f64);
    }
    Ok(TaylorExpansion {
        center: lambda0,
        coefficients,
        std_errors,
        probes: traces.probes,
        value_at_center: None,
    })
}
