//! Images, point-spread functions, the blur operator and the graph-Laplacian
//! prior precision.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::grid::ImageGrid;

/// A normalized, nonnegative blur kernel with the pixel that maps to the
/// output location (`anchor`, as `(row, col)`).
#[derive(Debug, Clone, PartialEq)]
pub struct Psf {
    grid: ImageGrid,
    anchor: (usize, usize),
}

impl Psf {
    /// Validates an already-normalized kernel.
    pub fn new(grid: ImageGrid, anchor: (usize, usize)) -> Result<Self> {
        if anchor.0 >= grid.height() || anchor.1 >= grid.width() {
            return Err(Error::Domain(format!(
                "anchor {anchor:?} outside kernel of shape {:?}",
                grid.shape()
            )));
        }
        if grid.values().iter().any(|&v| v < 0.0) {
            return Err(Error::Domain("kernel entries must be nonnegative".into()));
        }
        let total = grid.sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("kernel sums to {total}, not 1")));
        }
        Ok(Self { grid, anchor })
    }

    /// Clamps negative entries to zero and rescales to unit sum.
    pub fn normalized(grid: ImageGrid, anchor: (usize, usize)) -> Result<Self> {
        let (w, h) = (grid.width(), grid.height());
        let mut values: Vec<f64> = grid.into_values().into_iter().map(|v| v.max(0.0)).collect();
        let total: f64 = values.iter().sum();
        if total <= 0.0 {
            return Err(Error::DegeneratePsf);
        }
        values.iter_mut().for_each(|v| *v /= total);
        Self::new(ImageGrid::from_vec_unchecked(w, h, values), anchor)
    }

    /// The identity kernel.
    pub fn delta() -> Self {
        Self {
            grid: ImageGrid::constant(1, 1, 1.0),
            anchor: (0, 0),
        }
    }

    /// Uniform box kernel of the given shape, anchored at its top-left pixel.
    pub fn uniform(height: usize, width: usize) -> Self {
        Self::normalized(ImageGrid::constant(width, height, 1.0), (0, 0)).expect("uniform kernel is nondegenerate")
    }

    /// Truncated isotropic Gaussian on a `size x size` support, anchored at
    /// the central pixel.
    pub fn gaussian(size: usize, sigma: f64) -> Result<Self> {
        if size == 0 || !(sigma > 0.0) {
            return Err(Error::Domain("gaussian kernel needs size > 0 and sigma > 0".into()));
        }
        let c = (size / 2) as f64;
        let g = ImageGrid::from_fn(size, size, |r, col| {
            let dr = r as f64 - c;
            let dc = col as f64 - c;
            (-(dr * dr + dc * dc) / (2.0 * sigma * sigma)).exp()
        });
        Self::normalized(g, (size / 2, size / 2))
    }

    pub fn grid(&self) -> &ImageGrid {
        &self.grid
    }

    pub fn anchor(&self) -> (usize, usize) {
        self.anchor
    }

    pub fn with_anchor(mut self, anchor: (usize, usize)) -> Result<Self> {
        if anchor.0 >= self.grid.height() || anchor.1 >= self.grid.width() {
            return Err(Error::Domain(format!("anchor {anchor:?} outside kernel")));
        }
        self.anchor = anchor;
        Ok(self)
    }

    /// Iterates `(dr, dc, weight)` over nonzero taps, where the offsets are
    /// relative to the anchor.
    fn taps(&self) -> impl Iterator<Item = (isize, isize, f64)> + '_ {
        let (ar, ac) = (self.anchor.0 as isize, self.anchor.1 as isize);
        let w = self.grid.width();
        self.grid
            .values()
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(move |(i, &v)| ((i / w) as isize - ar, (i % w) as isize - ac, v))
    }
}

/// Rectangular crop `(row, col, height, width)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Region {
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
}

/// Crops a near-point source out of `data` to use as the blur kernel.
///
/// Negative pixels are clamped to zero before normalizing. Unless `anchor`
/// overrides it, the kernel origin is the brightest pixel of the crop (first
/// in row-major order on ties).
pub fn extract_psf(data: &ImageGrid, region: Region, anchor: Option<(usize, usize)>) -> Result<Psf> {
    if region.height == 0
        || region.width == 0
        || region.row + region.height > data.height()
        || region.col + region.width > data.width()
    {
        return Err(Error::Domain(format!(
            "region {region:?} outside image of shape {:?}",
            data.shape()
        )));
    }
    let crop = ImageGrid::from_fn(region.width, region.height, |r, c| {
        data.get(region.row + r, region.col + c).max(0.0)
    });
    let anchor = match anchor {
        Some(a) => a,
        None => {
            let (mut best, mut idx) = (f64::NEG_INFINITY, 0);
            for (i, &v) in crop.values().iter().enumerate() {
                if v > best {
                    best = v;
                    idx = i;
                }
            }
            (idx / region.width, idx % region.width)
        }
    };
    Psf::normalized(crop, anchor)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Boundary {
    /// Torus: every pixel has four neighbors.
    Periodic,
    /// Pixels beyond the grid are fixed at zero; the diagonal stays 4.
    DirichletZero,
}

/// One row of the edge-difference matrix `D` with `L = D^T D`: `+1` at `i`
/// and `-1` at `j`, or only `+1` at `i` for an edge to a fixed zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub i: usize,
    pub j: Option<usize>,
}

/// Graph Laplacian of the 4-neighbor pixel lattice (the 5-point stencil).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LaplacianOp {
    rows: usize,
    cols: usize,
    boundary: Boundary,
}

impl LaplacianOp {
    pub fn new(rows: usize, cols: usize, boundary: Boundary) -> Self {
        assert!(rows > 0 && cols > 0, "lattice dimensions must be positive");
        Self { rows, cols, boundary }
    }

    pub fn periodic(rows: usize, cols: usize) -> Self {
        Self::new(rows, cols, Boundary::Periodic)
    }

    pub fn dirichlet(rows: usize, cols: usize) -> Self {
        Self::new(rows, cols, Boundary::DirichletZero)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn dim(&self) -> usize {
        self.rows * self.cols
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Edge list whose difference matrix factors this operator.
    pub fn edges(&self) -> Vec<Edge> {
        let (h, w) = (self.rows, self.cols);
        let mut edges = Vec::with_capacity(2 * h * w + h + w);
        for r in 0..h {
            for c in 0..w {
                let i = r * w + c;
                match self.boundary {
                    Boundary::Periodic => {
                        edges.push(Edge {
                            i,
                            j: Some(r * w + (c + 1) % w),
                        });
                        edges.push(Edge {
                            i,
                            j: Some(((r + 1) % h) * w + c),
                        });
                    }
                    Boundary::DirichletZero => {
                        edges.push(Edge {
                            i,
                            j: (c + 1 < w).then(|| i + 1),
                        });
                        edges.push(Edge {
                            i,
                            j: (r + 1 < h).then(|| i + w),
                        });
                        if c == 0 {
                            edges.push(Edge { i, j: None });
                        }
                        if r == 0 {
                            edges.push(Edge { i, j: None });
                        }
                    }
                }
            }
        }
        edges
    }

    pub fn apply(&self, x: &ImageGrid) -> Result<ImageGrid> {
        x.expect_shape(self.shape())?;
        let mut out = vec![0.0; self.dim()];
        self.apply_slice(x.values(), &mut out);
        Ok(ImageGrid::from_vec_unchecked(self.cols, self.rows, out))
    }

    /// `out = L x` on flat row-major vectors.
    pub fn apply_slice(&self, x: &[f64], out: &mut [f64]) {
        let (h, w) = (self.rows, self.cols);
        assert_eq!(x.len(), h * w);
        assert_eq!(out.len(), h * w);
        let periodic = self.boundary == Boundary::Periodic;
        let at = |r: isize, c: isize| -> f64 {
            if periodic {
                let rr = r.rem_euclid(h as isize) as usize;
                let cc = c.rem_euclid(w as isize) as usize;
                x[rr * w + cc]
            } else if r < 0 || c < 0 || r >= h as isize || c >= w as isize {
                0.0
            } else {
                x[r as usize * w + c as usize]
            }
        };
        for r in 0..h {
            for c in 0..w {
                let (ri, ci) = (r as isize, c as isize);
                out[r * w + c] = 4.0 * x[r * w + c] - at(ri - 1, ci) - at(ri + 1, ci) - at(ri, ci - 1) - at(ri, ci + 1);
            }
        }
    }

    /// `x^T L x` as a sum of squared edge differences.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.edges()
            .iter()
            .map(|e| {
                let d = x[e.i] - e.j.map_or(0.0, |j| x[j]);
                d * d
            })
            .sum()
    }

    /// Eigenvalues in 2-D DFT order (periodic boundary only).
    pub fn spectrum(&self) -> Option<Vec<f64>> {
        if self.boundary != Boundary::Periodic {
            return None;
        }
        let (h, w) = (self.rows, self.cols);
        let tau = 2.0 * std::f64::consts::PI;
        let mut out = Vec::with_capacity(h * w);
        for k1 in 0..h {
            let a = 2.0 - 2.0 * (tau * k1 as f64 / h as f64).cos();
            for k2 in 0..w {
                let b = 2.0 - 2.0 * (tau * k2 as f64 / w as f64).cos();
                out.push(a + b);
            }
        }
        Some(out)
    }

    /// Draws `sqrt(delta) D^T eta` with one standard normal per edge, which
    /// has covariance `delta L`.
    pub fn sample_noise<R: Rng + ?Sized>(&self, delta: f64, rng: &mut R) -> Result<ImageGrid> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::Domain(format!("delta must be positive, got {delta}")));
        }
        let mut v = vec![0.0; self.dim()];
        self.add_noise(delta.sqrt(), rng, &mut v);
        Ok(ImageGrid::from_vec_unchecked(self.cols, self.rows, v))
    }

    /// Adds `scale * D^T eta` into `out` (assembly by cliques).
    pub(crate) fn add_noise<R: Rng + ?Sized>(&self, scale: f64, rng: &mut R, out: &mut [f64]) {
        for e in self.edges() {
            let eta: f64 = rng.sample(StandardNormal);
            let s = scale * eta;
            out[e.i] += s;
            if let Some(j) = e.j {
                out[j] -= s;
            }
        }
    }
}

/// See [`LaplacianOp::sample_noise`].
pub fn sample_prior_noise<R: Rng + ?Sized>(op: &LaplacianOp, delta: f64, rng: &mut R) -> Result<ImageGrid> {
    op.sample_noise(delta, rng)
}

/// Blur on a `rows x cols` torus, diagonalized by the 2-D DFT.
#[derive(Debug, Clone)]
pub struct PeriodicModel {
    psf: Psf,
    rows: usize,
    cols: usize,
    fft: Fft2,
    spectrum: Vec<Complex64>,
}

impl PeriodicModel {
    pub fn new(psf: Psf, rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Domain("image dimensions must be positive".into()));
        }
        let mut kernel = vec![0.0; rows * cols];
        for (dr, dc, v) in psf.taps() {
            let r = dr.rem_euclid(rows as isize) as usize;
            let c = dc.rem_euclid(cols as isize) as usize;
            kernel[r * cols + c] += v;
        }
        let fft = Fft2::new(rows, cols);
        let spectrum = fft.forward_real(&kernel);
        Ok(Self {
            psf,
            rows,
            cols,
            fft,
            spectrum,
        })
    }

    pub fn psf(&self) -> &Psf {
        &self.psf
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn fft(&self) -> &Fft2 {
        &self.fft
    }

    /// DFT of the wrapped kernel, i.e. the eigenvalues of `A`.
    pub fn spectrum(&self) -> &[Complex64] {
        &self.spectrum
    }

    fn filter(&self, x: &[f64], conjugate: bool) -> Vec<f64> {
        let mut xh = self.fft.forward_real(x);
        for (v, a) in xh.iter_mut().zip(&self.spectrum) {
            *v *= if conjugate { a.conj() } else { *a };
        }
        self.fft.inverse_real(&xh)
    }
}

/// Blur of a latent image that extends `border` pixels beyond the observed
/// window on every side, with zeros beyond the latent grid.
#[derive(Debug, Clone)]
pub struct ZeroPaddedModel {
    psf: Psf,
    rows: usize,
    cols: usize,
    border: usize,
}

impl ZeroPaddedModel {
    pub fn new(psf: Psf, rows: usize, cols: usize, border: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Domain("image dimensions must be positive".into()));
        }
        Ok(Self {
            psf,
            rows,
            cols,
            border,
        })
    }

    pub fn psf(&self) -> &Psf {
        &self.psf
    }

    pub fn border(&self) -> usize {
        self.border
    }

    fn latent(&self) -> (usize, usize) {
        (self.rows + 2 * self.border, self.cols + 2 * self.border)
    }

    fn forward(&self, x: &[f64], out: &mut [f64]) {
        let (lh, lw) = self.latent();
        let b = self.border as isize;
        out.fill(0.0);
        for (dr, dc, k) in self.psf.taps() {
            for r in 0..self.rows {
                let lr = r as isize + b - dr;
                if lr < 0 || lr >= lh as isize {
                    continue;
                }
                let row = &x[lr as usize * lw..(lr as usize + 1) * lw];
                let orow = &mut out[r * self.cols..(r + 1) * self.cols];
                for (c, o) in orow.iter_mut().enumerate() {
                    let lc = c as isize + b - dc;
                    if lc >= 0 && lc < lw as isize {
                        *o += k * row[lc as usize];
                    }
                }
            }
        }
    }

    fn adjoint(&self, y: &[f64], out: &mut [f64]) {
        let (lh, lw) = self.latent();
        let b = self.border as isize;
        out.fill(0.0);
        for (dr, dc, k) in self.psf.taps() {
            for r in 0..self.rows {
                let lr = r as isize + b - dr;
                if lr < 0 || lr >= lh as isize {
                    continue;
                }
                let yrow = &y[r * self.cols..(r + 1) * self.cols];
                let orow = &mut out[lr as usize * lw..(lr as usize + 1) * lw];
                for (c, &yv) in yrow.iter().enumerate() {
                    let lc = c as isize + b - dc;
                    if lc >= 0 && lc < lw as isize {
                        orow[lc as usize] += k * yv;
                    }
                }
            }
        }
    }
}

/// The forward map `A` in one of its two boundary treatments.
#[derive(Debug, Clone)]
pub enum ForwardModel {
    PeriodicSpectral(PeriodicModel),
    ZeroPaddedDirichlet(ZeroPaddedModel),
}

impl ForwardModel {
    pub fn periodic(psf: Psf, rows: usize, cols: usize) -> Result<Self> {
        PeriodicModel::new(psf, rows, cols).map(Self::PeriodicSpectral)
    }

    pub fn zero_padded(psf: Psf, rows: usize, cols: usize, border: usize) -> Result<Self> {
        ZeroPaddedModel::new(psf, rows, cols, border).map(Self::ZeroPaddedDirichlet)
    }

    pub fn psf(&self) -> &Psf {
        match self {
            Self::PeriodicSpectral(m) => &m.psf,
            Self::ZeroPaddedDirichlet(m) => &m.psf,
        }
    }

    /// `(rows, cols)` of the unknown image.
    pub fn latent_shape(&self) -> (usize, usize) {
        match self {
            Self::PeriodicSpectral(m) => m.shape(),
            Self::ZeroPaddedDirichlet(m) => m.latent(),
        }
    }

    /// `(rows, cols)` of the data.
    pub fn observed_shape(&self) -> (usize, usize) {
        match self {
            Self::PeriodicSpectral(m) => m.shape(),
            Self::ZeroPaddedDirichlet(m) => (m.rows, m.cols),
        }
    }

    pub fn latent_dim(&self) -> usize {
        let (r, c) = self.latent_shape();
        r * c
    }

    pub fn observed_dim(&self) -> usize {
        let (r, c) = self.observed_shape();
        r * c
    }

    pub fn boundary(&self) -> Boundary {
        match self {
            Self::PeriodicSpectral(_) => Boundary::Periodic,
            Self::ZeroPaddedDirichlet(_) => Boundary::DirichletZero,
        }
    }

    /// The prior precision operator on the latent grid with the matching
    /// boundary rule.
    pub fn laplacian(&self) -> LaplacianOp {
        let (r, c) = self.latent_shape();
        LaplacianOp::new(r, c, self.boundary())
    }

    pub fn as_periodic(&self) -> Option<&PeriodicModel> {
        match self {
            Self::PeriodicSpectral(m) => Some(m),
            Self::ZeroPaddedDirichlet(_) => None,
        }
    }

    /// `A x`.
    pub fn apply_forward(&self, x: &ImageGrid) -> Result<ImageGrid> {
        x.expect_shape(self.latent_shape())?;
        let (r, c) = self.observed_shape();
        let mut out = vec![0.0; r * c];
        self.forward_slice(x.values(), &mut out);
        Ok(ImageGrid::from_vec_unchecked(c, r, out))
    }

    /// `A^T y`.
    pub fn apply_adjoint(&self, y: &ImageGrid) -> Result<ImageGrid> {
        y.expect_shape(self.observed_shape())?;
        let (r, c) = self.latent_shape();
        let mut out = vec![0.0; r * c];
        self.adjoint_slice(y.values(), &mut out);
        Ok(ImageGrid::from_vec_unchecked(c, r, out))
    }

    pub fn forward_slice(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Self::PeriodicSpectral(m) => out.copy_from_slice(&m.filter(x, false)),
            Self::ZeroPaddedDirichlet(m) => m.forward(x, out),
        }
    }

    pub fn adjoint_slice(&self, y: &[f64], out: &mut [f64]) {
        match self {
            Self::PeriodicSpectral(m) => out.copy_from_slice(&m.filter(y, true)),
            Self::ZeroPaddedDirichlet(m) => m.adjoint(y, out),
        }
    }
}

/// See [`ForwardModel::apply_forward`].
pub fn apply_forward(model: &ForwardModel, x: &ImageGrid) -> Result<ImageGrid> {
    model.apply_forward(x)
}

/// See [`ForwardModel::apply_adjoint`].
pub fn apply_adjoint(model: &ForwardModel, y: &ImageGrid) -> Result<ImageGrid> {
    model.apply_adjoint(y)
}

/// See [`LaplacianOp::apply`].
pub fn apply_laplacian(op: &LaplacianOp, x: &ImageGrid) -> Result<ImageGrid> {
    op.apply(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn random_image(rows: usize, cols: usize, seed: u64) -> ImageGrid {
        let mut rng = stream(seed, 7);
        ImageGrid::from_fn(cols, rows, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn delta_psf_is_identity() {
        let x = random_image(5, 4, 1);
        let m = ForwardModel::periodic(Psf::delta(), 5, 4).unwrap();
        let y = m.apply_forward(&x).unwrap();
        assert!(x.rms_diff(&y).unwrap() < 1e-14);
        let z = ForwardModel::zero_padded(Psf::delta(), 5, 4, 0).unwrap();
        assert_eq!(z.apply_forward(&x).unwrap(), x);
        assert_eq!(z.apply_adjoint(&x).unwrap(), x);
    }

    #[test]
    fn uniform_average_on_two_by_two_torus() {
        let m = ForwardModel::periodic(Psf::uniform(2, 2), 2, 2).unwrap();
        let x = ImageGrid::new(2, 2, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        for v in m.apply_forward(&x).unwrap().values() {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_image_is_preserved() {
        let m = ForwardModel::periodic(Psf::gaussian(5, 1.3).unwrap(), 8, 8).unwrap();
        let y = m.apply_forward(&ImageGrid::constant(8, 8, 2.5)).unwrap();
        assert!(y.values().iter().all(|v| (v - 2.5).abs() < 1e-12));
    }

    #[test]
    fn symmetric_kernel_is_self_adjoint() {
        let m = ForwardModel::periodic(Psf::gaussian(3, 0.8).unwrap(), 6, 6).unwrap();
        let x = random_image(6, 6, 2);
        let a = m.apply_forward(&x).unwrap();
        let b = m.apply_adjoint(&x).unwrap();
        assert!(a.values().iter().zip(b.values()).all(|(u, v)| (u - v).abs() <= 1e-12));
    }

    #[test]
    fn adjoint_identity_both_variants() {
        let mut g = stream(5, 0);
        let k = ImageGrid::from_fn(3, 4, |_, _| g.random::<f64>());
        let psf = Psf::normalized(k, (1, 2)).unwrap();
        let models = [
            ForwardModel::periodic(psf.clone(), 7, 6).unwrap(),
            ForwardModel::zero_padded(psf, 5, 6, 2).unwrap(),
        ];
        for m in &models {
            let (lr, lc) = m.latent_shape();
            let (or, oc) = m.observed_shape();
            for s in 0..100 {
                let u = random_image(lr, lc, 100 + s);
                let v = random_image(or, oc, 300 + s);
                let lhs = m.apply_forward(&u).unwrap().dot(&v);
                let rhs = u.dot(&m.apply_adjoint(&v).unwrap());
                assert!((lhs - rhs).abs() <= 1e-10 * u.norm() * v.norm());
            }
        }
    }

    #[test]
    fn spectral_matches_direct_circular_convolution() {
        let mut g = stream(6, 0);
        let k = ImageGrid::from_fn(3, 3, |_, _| g.random::<f64>());
        let psf = Psf::normalized(k, (1, 0)).unwrap();
        let m = ForwardModel::periodic(psf.clone(), 8, 8).unwrap();
        let x = random_image(8, 8, 3);
        let y = m.apply_forward(&x).unwrap();
        let (ar, ac) = psf.anchor();
        for r in 0..8isize {
            for c in 0..8isize {
                let mut s = 0.0;
                for kr in 0..3isize {
                    for kc in 0..3isize {
                        let xr = (r - kr + ar as isize).rem_euclid(8) as usize;
                        let xc = (c - kc + ac as isize).rem_euclid(8) as usize;
                        s += psf.grid().get(kr as usize, kc as usize) * x.get(xr, xc);
                    }
                }
                assert!((s - y.get(r as usize, c as usize)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let m = ForwardModel::zero_padded(Psf::delta(), 4, 4, 1).unwrap();
        assert!(matches!(
            m.apply_forward(&ImageGrid::zeros(4, 4)),
            Err(Error::Dimension { .. })
        ));
        assert!(m.apply_adjoint(&ImageGrid::zeros(6, 6)).is_err());
    }

    #[test]
    fn laplacian_stencil_examples() {
        let p = LaplacianOp::periodic(4, 5);
        let z = p.apply(&ImageGrid::constant(5, 4, 3.0)).unwrap();
        assert!(z.values().iter().all(|v| *v == 0.0));

        let mut e = ImageGrid::zeros(3, 3);
        e.set(1, 1, 1.0);
        let out = LaplacianOp::periodic(3, 3).apply(&e).unwrap();
        assert_eq!(out.values(), &[0.0, -1.0, 0.0, -1.0, 4.0, -1.0, 0.0, -1.0, 0.0]);

        let d = LaplacianOp::dirichlet(2, 2)
            .apply(&ImageGrid::constant(2, 2, 1.0))
            .unwrap();
        assert_eq!(d.values(), &[2.0; 4]);
    }

    #[test]
    fn edges_factor_the_operator() {
        for op in [LaplacianOp::periodic(3, 4), LaplacianOp::dirichlet(3, 4)] {
            let x = random_image(3, 4, 9);
            let lx = op.apply(&x).unwrap();
            assert!((x.dot(&lx) - op.quadratic_form(x.values())).abs() < 1e-10);
        }
    }

    #[test]
    fn periodic_spectrum_matches_fft_of_stencil() {
        let op = LaplacianOp::periodic(4, 6);
        let mut e = ImageGrid::zeros(6, 4);
        e.set(0, 0, 1.0);
        let col = op.apply(&e).unwrap();
        let fft = Fft2::new(4, 6);
        let spec = fft.forward_real(col.values());
        for (a, b) in spec.iter().zip(op.spectrum().unwrap()) {
            assert!((a.re - b).abs() < 1e-12 && a.im.abs() < 1e-12);
        }
        assert!(LaplacianOp::dirichlet(2, 2).spectrum().is_none());
    }

    #[test]
    fn prior_noise_is_mean_zero_on_torus() {
        let op = LaplacianOp::periodic(5, 5);
        let mut rng = stream(1, 1);
        for _ in 0..20 {
            let v = sample_prior_noise(&op, 2.0, &mut rng).unwrap();
            let scale = v.values().iter().map(|x| x.abs()).sum::<f64>();
            assert!(v.sum().abs() <= 1e-9 * scale);
        }
        assert!(matches!(op.sample_noise(0.0, &mut rng), Err(Error::Domain(_))));
    }

    #[test]
    fn extract_psf_examples() {
        let mut data = ImageGrid::zeros(6, 6);
        data.set(2, 3, 5.0);
        let p = extract_psf(
            &data,
            Region {
                row: 1,
                col: 1,
                height: 3,
                width: 4,
            },
            None,
        )
        .unwrap();
        assert_eq!(p.anchor(), (1, 2));
        assert_eq!(p.grid().get(1, 2), 1.0);

        let flat = ImageGrid::constant(6, 6, 2.0);
        let u = extract_psf(
            &flat,
            Region {
                row: 0,
                col: 0,
                height: 2,
                width: 3,
            },
            Some((1, 1)),
        )
        .unwrap();
        assert!(u.grid().values().iter().all(|v| (v - 1.0 / 6.0).abs() < 1e-15));
        assert_eq!(u.anchor(), (1, 1));

        let mut neg = random_image(6, 6, 4);
        neg.set(0, 0, 10.0);
        let q = extract_psf(
            &neg,
            Region {
                row: 0,
                col: 0,
                height: 6,
                width: 6,
            },
            None,
        )
        .unwrap();
        assert!((q.grid().sum() - 1.0).abs() < 1e-12);
        assert!(q.grid().values().iter().all(|v| *v >= 0.0));

        let zero = ImageGrid::constant(3, 3, -1.0);
        assert!(matches!(
            extract_psf(
                &zero,
                Region {
                    row: 0,
                    col: 0,
                    height: 2,
                    width: 2
                },
                None
            ),
            Err(Error::DegeneratePsf)
        ));
        assert!(extract_psf(
            &zero,
            Region {
                row: 2,
                col: 2,
                height: 2,
                width: 2
            },
            None
        )
        .is_err());
    }
}
