//! Stochastic estimates of `tr((B^{-1} L)^r)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::dot;

/// How the traces behind the `g` expansion are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceMethod {
    /// Rademacher probes.
    Hutchinson { probes: usize },
    /// Unit-vector probes: `n` sweeps, exact up to solver tolerance.
    Exact,
}

impl Default for TraceMethod {
    fn default() -> Self {
        TraceMethod::Hutchinson { probes: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEstimate {
    /// Estimates of `tr((B^{-1} L)^r)` for `r = 1..=s`.
    pub values: Vec<f64>,
    pub probes: usize,
    /// Monte Carlo standard errors; infinite with a single probe, zero for
    /// exact traces.
    pub std_errors: Vec<f64>,
}

/// One sweep `v <- B^{-1} L v` from `v = z`, returning `z^T v` after each of
/// the `order` applications.
fn sweep(
    z: &[f64],
    order: usize,
    b_solve: &mut dyn FnMut(&[f64]) -> Result<Vec<f64>>,
    l_apply: &dyn Fn(&[f64], &mut [f64]),
) -> Result<Vec<f64>> {
    let mut v = z.to_vec();
    let mut lv = vec![0.0; z.len()];
    let mut out = Vec::with_capacity(order);
    for _ in 0..order {
        l_apply(&v, &mut lv);
        v = b_solve(&lv)?;
        out.push(dot(z, &v));
    }
    Ok(out)
}

/// Hutchinson estimates of the first `order` traces of `B^{-1} L` from
/// `probes` Rademacher vectors. Costs `probes * order` solves with `B`.
pub fn hutchinson_traces<R: Rng + ?Sized>(
    b_solve: &mut dyn FnMut(&[f64]) -> Result<Vec<f64>>,
    l_apply: &dyn Fn(&[f64], &mut [f64]),
    dim: usize,
    order: usize,
    probes: usize,
    rng: &mut R,
) -> Result<TraceEstimate> {
    if probes == 0 || order == 0 {
        return Err(Error::Parameter(
            "trace estimation needs at least one probe and order".into(),
        ));
    }
    let mut samples = Vec::with_capacity(probes);
    for _ in 0..probes {
        let z: Vec<f64> = (0..dim)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        samples.push(sweep(&z, order, b_solve, l_apply)?);
    }
    let k = probes as f64;
    let mut values = Vec::with_capacity(order);
    let mut std_errors = Vec::with_capacity(order);
    for r in 0..order {
        let mean = samples.iter().map(|s| s[r]).sum::<f64>() / k;
        values.push(mean);
        std_errors.push(if probes > 1 {
            let var = samples.iter().map(|s| (s[r] - mean).powi(2)).sum::<f64>() / (k - 1.0);
            (var / k).sqrt()
        } else {
            f64::INFINITY
        });
    }
    Ok(TraceEstimate {
        values,
        probes,
        std_errors,
    })
}

/// Traces from the `dim` unit vectors. Costs `dim * order` solves.
pub fn exact_traces(
    b_solve: &mut dyn FnMut(&[f64]) -> Result<Vec<f64>>,
    l_apply: &dyn Fn(&[f64], &mut [f64]),
    dim: usize,
    order: usize,
) -> Result<TraceEstimate> {
    let mut values = vec![0.0; order];
    let mut e = vec![0.0; dim];
    for i in 0..dim {
        e[i] = 1.0;
        for (v, s) in values.iter_mut().zip(sweep(&e, order, b_solve, l_apply)?) {
            *v += s;
        }
        e[i] = 0.0;
    }
    Ok(TraceEstimate {
        values,
        probes: dim,
        std_errors: vec![0.0; order],
    })
}
