//! Autocorrelation, integrated autocorrelation time (IACT), computing cost per
//! effective sample (CCES), and histograms.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default Wolff window factor.
pub const DEFAULT_WINDOW_FACTOR: f64 = 1.5;

/// Normalized autocorrelation `rho_0..=rho_max_lag` with the biased (`1/N`)
/// estimator after mean removal, computed through a zero-padded FFT.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if n < 2 || n < 2 * max_lag {
        return Err(Error::Parameter(format!(
            "series of length {n} is too short for lag {max_lag}"
        )));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex64> = series
        .iter()
        .map(|v| Complex64::new(v - mean, 0.0))
        .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for v in buf.iter_mut() {
        *v = Complex64::new(v.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let c0 = buf[0].re;
    if !(c0 > 1e-300 * n as f64 * (mean * mean).max(1e-300)) || c0 == 0.0 {
        return Err(Error::DegenerateSeries);
    }
    Ok(buf[..=max_lag].iter().map(|v| v.re / c0).collect())
}

/// IACT estimate with its automatic window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Iact {
    /// `1 + 2 sum_{k=1}^W rho_k`.
    pub tau: f64,
    pub std_error: f64,
    pub window: usize,
    /// Set when the window ran into the `N/2` limit.
    pub unreliable: bool,
}

impl Iact {
    /// Half of `tau`, the convention common in the physics literature.
    pub fn physics_tau(&self) -> f64 {
        0.5 * self.tau
    }
}

/// [`iact_with`] using the default window factor 1.5.
pub fn iact(series: &[f64]) -> Result<Iact> {
    iact_with(series, DEFAULT_WINDOW_FACTOR)
}

/// Smallest window `W` with `W >= S tau(W)`, where `tau(W) = 1 + 2 sum_{k<=W}
/// rho_k` (statistics convention). The standard error follows the
/// Madras-Sokal approximation `tau sqrt(2(2W+1)/N)`.
pub fn iact_with(series: &[f64], window_factor: f64) -> Result<Iact> {
    let n = series.len();
    if n < 100 {
        return Err(Error::Parameter(format!("IACT needs at least 100 samples, got {n}")));
    }
    if !(window_factor > 0.0) {
        return Err(Error::Parameter("window factor must be positive".into()));
    }
    let max_lag = n / 2;
    let rho = autocorrelation(series, max_lag)?;
    let mut tau = 1.0;
    let mut window = max_lag;
    let mut unreliable = true;
    for (w, r) in rho.iter().enumerate().skip(1) {
        tau += 2.0 * r;
        if w as f64 >= window_factor * tau {
            window = w;
            unreliable = false;
            break;
        }
    }
    if unreliable {
        log::warn!("IACT window reached N/2 = {max_lag}; the estimate is unreliable");
    }
    let tau = tau.max(f64::MIN_POSITIVE);
    Ok(Iact {
        tau,
        std_error: tau * (2.0 * (2 * window + 1) as f64 / n as f64).sqrt(),
        window,
        unreliable,
    })
}

/// Computing cost per effective sample `tau T / N`.
pub fn cces(tau: f64, total_time_seconds: f64, chain_length: usize) -> f64 {
    tau * total_time_seconds / chain_length as f64
}

/// Equal-width histogram normalized to unit total weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` edges spanning `[min, max]`.
    pub edges: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Histogram {
    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// CSV with header `lower,upper,weight`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lower,upper,weight\n");
        for (e, w) in self.edges.windows(2).zip(&self.weights) {
            out.push_str(&format!("{:e},{:e},{:e}\n", e[0], e[1], w));
        }
        out
    }
}

/// A constant series yields a single bin of weight 1.
pub fn histogram(series: &[f64], bins: usize) -> Result<Histogram> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    if bins == 0 {
        return Err(Error::Parameter("histogram needs at least one bin".into()));
    }
    let lo = series.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Ok(Histogram {
            edges: vec![lo, hi],
            weights: vec![1.0],
        });
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in series {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let n = series.len() as f64;
    Ok(Histogram {
        edges: (0..=bins)
            .map(|i| if i == bins { hi } else { lo + width * i as f64 })
            .collect(),
        weights: counts.iter().map(|&c| c as f64 / n).collect(),
    })
}

/// Per-statistic summary of a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub statistic: String,
    pub mean: f64,
    pub std_dev: f64,
    pub tau: f64,
    pub tau_std_error: f64,
    pub window: usize,
    pub unreliable: bool,
    /// `rho_0..=rho_W`.
    pub acf: Vec<f64>,
    pub cces: f64,
    pub acceptance_rate: f64,
    pub histogram: Histogram,
    /// Five times a pilot IACT, for information; never applied here.
    pub suggested_burn_in: usize,
}

/// Summarizes one statistic of a chain that already had its burn-in removed.
pub fn report(
    statistic: &str,
    series: &[f64],
    wall_time: f64,
    acceptance_rate: f64,
    bins: usize,
) -> Result<DiagnosticsReport> {
    let est = iact(series)?;
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let var = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let acf = autocorrelation(series, est.window.min(n / 2))?;
    Ok(DiagnosticsReport {
        statistic: statistic.to_string(),
        mean,
        std_dev: var.sqrt(),
        tau: est.tau,
        tau_std_error: est.std_error,
        window: est.window,
        unreliable: est.unreliable,
        acf,
        cces: cces(est.tau, wall_time, n),
        acceptance_rate,
        histogram: histogram(series, bins)?,
        suggested_burn_in: (5.0 * est.tau).ceil() as usize,
    })
}
