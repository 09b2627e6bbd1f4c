use crate::{OracleError, Result};

/// `k` log-spaced points from `lo` to `hi`.
pub fn log_spaced(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    assert!(k >= 2 && lo > 0.0 && hi > lo);
    (0..k)
        .map(|i| (lo.ln() + (hi / lo).ln() * i as f64 / (k - 1) as f64).exp())
        .collect()
}

/// Normalized posterior mass on a tensor grid over `(gamma, delta)`.
#[derive(Debug, Clone)]
pub struct QuadratureTable {
    pub gammas: Vec<f64>,
    pub deltas: Vec<f64>,
    /// `mass[i][j]` at `(gammas[i], deltas[j])`; sums to 1.
    pub mass: Vec<Vec<f64>>,
}

fn cell_widths(nodes: &[f64]) -> Vec<f64> {
    let k = nodes.len();
    (0..k)
        .map(|i| {
            let lo = if i == 0 {
                nodes[0]
            } else {
                0.5 * (nodes[i - 1] + nodes[i])
            };
            let hi = if i + 1 == k {
                nodes[k - 1]
            } else {
                0.5 * (nodes[i] + nodes[i + 1])
            };
            hi - lo
        })
        .collect()
}

/// Tabulates `exp(log_density(gamma, delta))` times cell area, normalized.
/// Fails when more than `boundary_tol` of the mass lies on the outermost
/// grid lines.
pub fn quadrature_marginal(
    log_density: impl Fn(f64, f64) -> f64,
    gammas: &[f64],
    deltas: &[f64],
    boundary_tol: f64,
) -> Result<QuadratureTable> {
    if gammas.len() < 3 || deltas.len() < 3 {
        return Err(OracleError::Parameter("grid needs at least 3 nodes per axis".into()));
    }
    if gammas.windows(2).any(|w| w[1] <= w[0]) || deltas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(OracleError::Parameter("grid nodes must increase".into()));
    }
    let (wg, wd) = (cell_widths(gammas), cell_widths(deltas));
    let mut logs = vec![vec![0.0; deltas.len()]; gammas.len()];
    let mut top = f64::NEG_INFINITY;
    for (i, &g) in gammas.iter().enumerate() {
        for (j, &d) in deltas.iter().enumerate() {
            let v = log_density(g, d) + (wg[i] * wd[j]).ln();
            logs[i][j] = v;
            top = top.max(v);
        }
    }
    let mut total = 0.0;
    let mut mass: Vec<Vec<f64>> = logs
        .iter()
        .map(|row| {
            row.iter()
                .map(|v| {
                    let m = (v - top).exp();
                    total += m;
                    m
                })
                .collect()
        })
        .collect();
    for row in &mut mass {
        for m in row.iter_mut() {
            *m /= total;
        }
    }
    let (kg, kd) = (gammas.len(), deltas.len());
    let mut edge = 0.0;
    for (i, row) in mass.iter().enumerate() {
        for (j, m) in row.iter().enumerate() {
            if i == 0 || j == 0 || i + 1 == kg || j + 1 == kd {
                edge += m;
            }
        }
    }
    if edge > boundary_tol {
        return Err(OracleError::GridTooSmall(edge));
    }
    Ok(QuadratureTable {
        gammas: gammas.to_vec(),
        deltas: deltas.to_vec(),
        mass,
    })
}

impl QuadratureTable {
    /// Posterior expectation of `h(gamma, delta)`.
    pub fn expect(&self, h: impl Fn(f64, f64) -> f64) -> f64 {
        let mut s = 0.0;
        for (i, &g) in self.gammas.iter().enumerate() {
            for (j, &d) in self.deltas.iter().enumerate() {
                s += self.mass[i][j] * h(g, d);
            }
        }
        s
    }

    /// Means of `(gamma, delta, lambda)`.
    pub fn means(&self) -> (f64, f64, f64) {
        (self.expect(|g, _| g), self.expect(|_, d| d), self.expect(|g, d| d / g))
    }

    /// Standard deviations of `(gamma, delta, lambda)`.
    pub fn std_devs(&self) -> (f64, f64, f64) {
        let (mg, md, ml) = self.means();
        (
            self.expect(|g, _| (g - mg).powi(2)).sqrt(),
            self.expect(|_, d| (d - md).powi(2)).sqrt(),
            self.expect(|g, d| (d / g - ml).powi(2)).sqrt(),
        )
    }
}
