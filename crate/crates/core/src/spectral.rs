//! Transform-domain evaluation of
//!
//! ```text
//! f(lambda) = y^T y - (A^T y)^T (A^T A + lambda L)^{-1} A^T y
//! g(lambda) = log det(A^T A + lambda L)
//! ```
//!
//! for the periodic model, either directly in `O(n)` or through truncated
//! head/tail power series over the sorted generalized eigenvalues
//! `Z_i = Lhat_i / |Ahat_i|^2`, which touch only the modes with `lambda Z_i`
//! inside `[c, 1/c]` and carry a certified absolute error `eps`.

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use crate::model::{PeriodicModel, Psf};
use crate::sum::CompensatedSum;

/// Relative magnitude below which a mode of `A` counts as a spectral zero.
pub const SPECTRAL_ZERO_THRESHOLD: f64 = 1e-12;

/// Default order of the head and tail series.
pub const DEFAULT_SERIES_ORDER: usize = 8;

const MAGIC: &[u8; 8] = b"MTCSPEC\0";
const FORMAT_VERSION: u32 = 1;

/// Diagonalized periodic problem with modes sorted by `Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCache {
    ahat: Vec<Complex64>,
    lhat: Vec<f64>,
    yhat: Vec<Complex64>,
    z: Vec<f64>,
    w: Vec<f64>,
    order: Vec<usize>,
    ydoty: f64,
    log_gram: f64,
    flagged: Vec<usize>,
}

impl SpectralCache {
    /// Builds the cache for data `y` under the periodic blur `model`.
    pub fn build(model: &PeriodicModel, y: &ImageGrid) -> Result<Self> {
        y.expect_shape(model.shape())?;
        let yhat = model.fft().forward_real(y.values());
        let lhat = crate::model::LaplacianOp::periodic(model.shape().0, model.shape().1)
            .spectrum()
            .expect("periodic spectrum");
        let ydoty = y.dot(y);
        Ok(Self::from_spectra(model.spectrum().to_vec(), lhat, yhat, ydoty))
    }

    /// Builds a cache directly from per-mode quantities: `gram[i] = |Ahat_i|^2`,
    /// `lhat[i]`, and data weights `w[i] = |yhat_i|^2 / n`.
    pub fn from_modes(gram: &[f64], lhat: &[f64], w: &[f64]) -> Result<Self> {
        let n = gram.len();
        if lhat.len() != n || w.len() != n || n == 0 {
            return Err(Error::Parameter(
                "mode arrays must be nonempty and of equal length".into(),
            ));
        }
        if gram.iter().chain(lhat).chain(w).any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Domain("mode quantities must be finite and nonnegative".into()));
        }
        let ahat = gram.iter().map(|g| Complex64::new(g.sqrt(), 0.0)).collect();
        let yhat = w.iter().map(|wi| Complex64::new((wi * n as f64).sqrt(), 0.0)).collect();
        let ydoty = w.iter().copied().collect::<CompensatedSum>().value();
        Ok(Self::from_spectra(ahat, lhat.to_vec(), yhat, ydoty))
    }

    fn from_spectra(ahat: Vec<Complex64>, lhat: Vec<f64>, yhat: Vec<Complex64>, ydoty: f64) -> Self {
        let n = ahat.len();
        let max_abs = ahat.iter().map(|a| a.norm()).fold(0.0, f64::max);
        let cutoff = SPECTRAL_ZERO_THRESHOLD * max_abs;
        let mut flagged = Vec::new();
        let mut z_orig = Vec::with_capacity(n);
        let mut log_gram = CompensatedSum::new();
        for (i, (a, l)) in ahat.iter().zip(&lhat).enumerate() {
            if a.norm() <= cutoff {
                flagged.push(i);
                z_orig.push(f64::INFINITY);
            } else {
                let g = a.norm_sqr();
                log_gram.add(g.ln());
                z_orig.push(l / g);
            }
        }
        if !flagged.is_empty() {
            log::warn!(
                "{} mode(s) of the blur operator are numerically zero; log-determinants are unavailable",
                flagged.len()
            );
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| z_orig[i].total_cmp(&z_orig[j]).then(i.cmp(&j)));
        let z = order.iter().map(|&i| z_orig[i]).collect();
        let w = order.iter().map(|&i| yhat[i].norm_sqr() / n as f64).collect();
        Self {
            ahat,
            lhat,
            yhat,
            z,
            w,
            order,
            ydoty,
            log_gram: log_gram.value(),
            flagged,
        }
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// Spectrum of `A` in DFT order.
    pub fn ahat(&self) -> &[Complex64] {
        &self.ahat
    }

    /// Spectrum of `L` in DFT order.
    pub fn lhat(&self) -> &[f64] {
        &self.lhat
    }

    /// DFT of the data in DFT order.
    pub fn yhat(&self) -> &[Complex64] {
        &self.yhat
    }

    /// Sorted generalized eigenvalues (spectral zeros of `A` sort last as `inf`).
    pub fn z(&self) -> &[f64] {
        &self.z
    }

    /// Data weights aligned with [`Self::z`].
    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    /// `order()[k]` is the DFT index of the `k`-th smallest `Z`.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn ydoty(&self) -> f64 {
        self.ydoty
    }

    /// `sum log |Ahat_i|^2` over unflagged modes.
    pub fn log_gram(&self) -> f64 {
        self.log_gram
    }

    /// DFT indices of modes where `|Ahat_i|` is numerically zero.
    pub fn flagged_modes(&self) -> &[usize] {
        &self.flagged
    }

    fn require_no_flags(&self) -> Result<()> {
        if self.flagged.is_empty() {
            Ok(())
        } else {
            Err(Error::SpectralZeros {
                modes: self.flagged.clone(),
            })
        }
    }

    /// Writes the cache in a versioned little-endian binary layout.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&FORMAT_VERSION.to_le_bytes())?;
        out.write_all(&(self.len() as u64).to_le_bytes())?;
        let put = |out: &mut W, v: f64| out.write_all(&v.to_le_bytes());
        for c in self.ahat.iter().chain(&self.yhat) {
            put(&mut out, c.re)?;
            put(&mut out, c.im)?;
        }
        for &v in &self.lhat {
            put(&mut out, v)?;
        }
        put(&mut out, self.ydoty)?;
        Ok(())
    }

    /// Reads a cache written by [`Self::write_to`]. Sorting and the derived
    /// quantities are recomputed, so the result equals the original.
    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a spectral cache file".into()));
        }
        let mut b4 = [0u8; 4];
        input.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported cache version {version}")));
        }
        let mut b8 = [0u8; 8];
        input.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        let mut get = || -> Result<f64> {
            input.read_exact(&mut b8)?;
            Ok(f64::from_le_bytes(b8))
        };
        let complex = |count: usize, get: &mut dyn FnMut() -> Result<f64>| -> Result<Vec<Complex64>> {
            (0..count).map(|_| Ok(Complex64::new(get()?, get()?))).collect()
        };
        let ahat = complex(n, &mut get)?;
        let yhat = complex(n, &mut get)?;
        let lhat = (0..n).map(|_| get()).collect::<Result<Vec<_>>>()?;
        let ydoty = get()?;
        Ok(Self::from_spectra(ahat, lhat, yhat, ydoty))
    }
}

/// See [`SpectralCache::build`]; the periodic model takes the data's shape.
pub fn build_spectral_cache(psf: &Psf, y: &ImageGrid) -> Result<SpectralCache> {
    let model = PeriodicModel::new(psf.clone(), y.height(), y.width())?;
    SpectralCache::build(&model, y)
}

#[inline]
fn f_term(lambda: f64, z: f64) -> f64 {
    if z.is_infinite() {
        1.0
    } else {
        let t = lambda * z;
        t / (1.0 + t)
    }
}

/// `sum_i w_i lambda Z_i / (1 + lambda Z_i)`.
pub fn f_direct(cache: &SpectralCache, lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::Domain(format!("lambda must be nonnegative, got {lambda}")));
    }
    Ok(cache
        .z
        .iter()
        .zip(&cache.w)
        .map(|(&z, &w)| w * f_term(lambda, z))
        .collect::<CompensatedSum>()
        .value())
}

/// `a + sum_i log(1 + lambda Z_i)`.
pub fn g_direct(cache: &SpectralCache, lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::Domain(format!("lambda must be nonnegative, got {lambda}")));
    }
    cache.require_no_flags()?;
    let mut acc = CompensatedSum::new();
    acc.add(cache.log_gram);
    for &z in &cache.z {
        acc.add((lambda * z).ln_1p());
    }
    Ok(acc.value())
}

/// Cumulative power sums over the sorted modes.
///
/// Prefix tables are indexed by the number of leading modes `q` (so entry 0 is
/// zero) and suffix tables by the first included mode (entry `n` is zero).
/// Entries are only consulted where the included `Z` are finite and, for the
/// negative powers, positive.
#[derive(Debug, Clone)]
pub struct CumulantTables {
    order: usize,
    /// `S[r-1][q] = sum_{j<q} w_j Z_j^r`, `r = 1..=s`.
    s: Vec<Vec<f64>>,
    /// `T[r][q] = sum_{j>=q} w_j Z_j^-r`, `r = 0..=s`.
    t: Vec<Vec<f64>>,
    /// `U[r-1][q] = sum_{j<q} Z_j^r`.
    u: Vec<Vec<f64>>,
    /// `V[r-1][q] = sum_{j>=q} Z_j^-r`.
    v: Vec<Vec<f64>>,
    /// `b[q] = sum_{j>=q} log Z_j`.
    b: Vec<f64>,
    a: f64,
}

impl CumulantTables {
    pub fn build(cache: &SpectralCache, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::Parameter("series order must be at least 1".into()));
        }
        let n = cache.len();
        let prefix = |term: &dyn Fn(usize) -> f64| -> Vec<f64> {
            let mut out = Vec::with_capacity(n + 1);
            let mut acc = CompensatedSum::new();
            out.push(0.0);
            for j in 0..n {
                let z = cache.z[j];
                if z.is_finite() {
                    acc.add(term(j));
                }
                out.push(acc.value());
            }
            out
        };
        let suffix = |term: &dyn Fn(usize) -> f64| -> Vec<f64> {
            let mut out = vec![0.0; n + 1];
            let mut acc = CompensatedSum::new();
            for j in (0..n).rev() {
                if cache.z[j] > 0.0 {
                    acc.add(term(j));
                }
                out[j] = acc.value();
            }
            out
        };
        let zpow = |j: usize, r: i32| -> f64 {
            let z = cache.z[j];
            if z.is_infinite() {
                if r == 0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                z.powi(r)
            }
        };
        let w = &cache.w;
        let s = (1..=order as i32).map(|r| prefix(&|j| w[j] * zpow(j, r))).collect();
        let t = (0..=order as i32).map(|r| suffix(&|j| w[j] * zpow(j, -r))).collect();
        let u = (1..=order as i32).map(|r| prefix(&|j| zpow(j, r))).collect();
        let v = (1..=order as i32).map(|r| suffix(&|j| zpow(j, -r))).collect();
        let b = suffix(&|j| cache.z[j].ln());
        Ok(Self {
            order,
            s,
            t,
            u,
            v,
            b,
            a: cache.log_gram,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// `S_{r,q}` for `r >= 1`.
    pub fn head_weighted(&self, r: usize, q: usize) -> f64 {
        self.s[r - 1][q]
    }

    /// `T_{r,q}` for `r >= 0`.
    pub fn tail_weighted(&self, r: usize, q: usize) -> f64 {
        self.t[r][q]
    }

    pub fn head_plain(&self, r: usize, q: usize) -> f64 {
        self.u[r - 1][q]
    }

    pub fn tail_plain(&self, r: usize, q: usize) -> f64 {
        self.v[r - 1][q]
    }

    pub fn tail_log(&self, q: usize) -> f64 {
        self.b[q]
    }
}

/// Result of a series evaluation with the band split that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FastEvaluation {
    pub value: f64,
    /// Modes summed by the head series (`lambda Z < c`).
    pub head_terms: usize,
    /// Modes summed exactly (`c <= lambda Z <= 1/c`).
    pub middle_terms: usize,
    /// Modes summed by the tail series (`lambda Z > 1/c`).
    pub tail_terms: usize,
}

fn band_constant(eps: f64, scale: f64, order: usize) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Parameter(format!("tolerance must be positive, got {eps}")));
    }
    let c = (eps / scale).powf(1.0 / (order as f64 + 1.0));
    if !(c < 1.0) {
        return Err(Error::Parameter(format!(
            "tolerance {eps} too large: band constant {c} is not below 1"
        )));
    }
    Ok(c)
}

fn band(cache: &SpectralCache, lambda: f64, c: f64) -> (usize, usize) {
    let m1 = cache.z.partition_point(|&z| lambda * z < c);
    let m2 = cache.z.partition_point(|&z| lambda * z <= 1.0 / c);
    (m1, m2)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("lambda must be positive, got {lambda}")))
    }
}

/// Series evaluation of `f` with `|error| <= eps`.
pub fn f_fast_detailed(
    cache: &SpectralCache,
    tables: &CumulantTables,
    lambda: f64,
    eps: f64,
) -> Result<FastEvaluation> {
    check_lambda(lambda)?;
    let n = cache.len();
    if cache.ydoty == 0.0 {
        return Ok(FastEvaluation {
            value: 0.0,
            head_terms: 0,
            middle_terms: 0,
            tail_terms: n,
        });
    }
    let s = tables.order;
    let c = band_constant(eps, cache.ydoty, s)?;
    let (m1, m2) = band(cache, lambda, c);
    let mut acc = CompensatedSum::new();
    for j in m1..m2 {
        acc.add(cache.w[j] * f_term(lambda, cache.z[j]));
    }
    let mut lp = 1.0;
    for r in 1..=s {
        lp *= lambda;
        let sign = if r % 2 == 1 { 1.0 } else { -1.0 };
        acc.add(sign * lp * tables.s[r - 1][m1]);
    }
    let mut lm = 1.0;
    for r in 0..=s {
        if r > 0 {
            lm /= lambda;
        }
        let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
        acc.add(sign * lm * tables.t[r][m2]);
    }
    Ok(FastEvaluation {
        value: acc.value(),
        head_terms: m1,
        middle_terms: m2 - m1,
        tail_terms: n - m2,
    })
}

/// Series evaluation of `g` with `|error| <= eps`.
pub fn g_fast_detailed(
    cache: &SpectralCache,
    tables: &CumulantTables,
    lambda: f64,
    eps: f64,
) -> Result<FastEvaluation> {
    check_lambda(lambda)?;
    cache.require_no_flags()?;
    let n = cache.len();
    let s = tables.order;
    let c = band_constant(eps, n as f64, s)?;
    let (m1, m2) = band(cache, lambda, c);
    let mut acc = CompensatedSum::new();
    acc.add(tables.a);
    acc.add(tables.b[m2]);
    acc.add((n - m2) as f64 * lambda.ln());
    for j in m1..m2 {
        acc.add((lambda * cache.z[j]).ln_1p());
    }
    let (mut lp, mut lm) = (1.0, 1.0);
    for r in 1..=s {
        lp *= lambda;
        lm /= lambda;
        let coef = if r % 2 == 1 { 1.0 } else { -1.0 } / r as f64;
        acc.add(coef * lp * tables.u[r - 1][m1]);
        acc.add(coef * lm * tables.v[r - 1][m2]);
    }
    Ok(FastEvaluation {
        value: acc.value(),
        head_terms: m1,
        middle_terms: m2 - m1,
        tail_terms: n - m2,
    })
}

pub fn f_fast(cache: &SpectralCache, tables: &CumulantTables, lambda: f64, eps: f64) -> Result<f64> {
    f_fast_detailed(cache, tables, lambda, eps).map(|e| e.value)
}

pub fn g_fast(cache: &SpectralCache, tables: &CumulantTables, lambda: f64, eps: f64) -> Result<f64> {
    g_fast_detailed(cache, tables, lambda, eps).map(|e| e.value)
}
